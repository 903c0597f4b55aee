#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "optira/llm.hpp"
#include "optira/model.hpp"

namespace optira {

// Sets E, O and R_c extracted from the problem text.
struct ExtractedVariable {
  std::string name;
  VarType type = VarType::Continuous;
  std::string unit;
};

struct ObjectiveDescription {
  Sense sense = Sense::Minimize;
  std::string description;
  std::vector<std::string> variables;
};

struct ConstraintValue {
  std::string variable;
  double value = 0.0;
  std::string unit;
  std::string source;
};

struct ExtractionSets {
  std::vector<ExtractedVariable> E;
  ObjectiveDescription O;
  std::vector<ConstraintValue> Rc;
};

nlohmann::json to_json(const ExtractionSets& s);
/// Strict schema check; throws SchemaError naming the offending field.
ExtractionSets sets_from_json(const nlohmann::json& doc);
/// Parses the fenced JSON block of a reply. Throws SchemaError.
nlohmann::json fenced_json(const std::string& reply);

/// Asks the backend for the sets, with one reformat retry on a schema violation.
ExtractionSets extract_sets(const std::string& text, Conversation& conversation);

/// Asks the backend for objective and constraint expressions and
/// canonicalizes them. One repair prompt when the proposal cannot be used.
/// Throws ModelError when the repaired proposal still fails.
StandardForm build_model(const ExtractionSets& sets, const std::string& text,
                         Conversation& conversation, const std::string& feedback = {});

/// Turns a model proposal document into a standard form (no backend involved).
StandardForm model_from_proposal(const nlohmann::json& proposal, const ExtractionSets& sets,
                                 const ProblemMetadata& metadata);

struct ConsistencyReport {
  bool xi1 = false;
  bool xi2 = false;
  bool xi3 = false;
  bool xi4 = false;
  int T = 0;
  std::map<std::string, std::string> explanations;
};

nlohmann::json to_json(const ConsistencyReport& r);

/// Variable types of the model agree with E.
bool check_variable_types(const StandardForm& model, const ExtractionSets& sets, std::string& why);
/// Every constraint value of R_c appears, after unit conversion, as a
/// constant of some constraint or variable bound.
bool check_constraint_values(const StandardForm& model, const ExtractionSets& sets, std::string& why);

ConsistencyReport validate_consistency(const StandardForm& model, const ExtractionSets& sets,
                                       const std::string& text, Conversation& conversation);

inline constexpr int kMaxConsistencyRebuilds = 2;

struct ConstructedModel {
  ExtractionSets sets;
  StandardForm model;
  ConsistencyReport consistency;
  int rebuilds = 0;
};

/// Extraction, model construction and consistency validation, rebuilding
/// the model at most twice while T = 0.
ConstructedModel construct_model(const std::string& text, Conversation& conversation);

}  // namespace optira
