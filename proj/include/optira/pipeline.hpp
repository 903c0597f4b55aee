#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "optira/llm.hpp"
#include "optira/model.hpp"
#include "optira/refine.hpp"
#include "optira/sandbox.hpp"

namespace optira {

inline constexpr std::string_view kRunRecordSchema = "optira-run/1";

struct AblationConfig {
  bool o_convex = false;  // skip convexification
  bool o_ecl = false;     // skip the error correction loop
  bool o_fdc = false;     // skip feasibility domain correction

  /// "full", or the omitted components joined by '+', e.g. "o-convex+o-fdc".
  std::string label() const;
  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

/// Parses "full" or a '+'/','-separated list of o-convex, o-ecl, o-fdc.
AblationConfig parse_ablation(std::string_view text);

struct PipelineConfig {
  int K = kDefaultEclCap;
  int L = kDefaultFdcCap;
  double epsilon = kDefaultEpsilon;
  double gamma = kDefaultFdcGamma;
  AblationConfig ablation;
  Target target = Target::Internal;
  ExecutionContext execution;
  /// Keeps SCA iteration traces in the run record.
  bool verbose = false;

  /// Throws InputError for out-of-range caps or tolerances.
  void validate() const;
};

struct PipelineInput {
  std::string id;
  std::string text;
  /// Used instead of the backend when no backend is configured.
  std::optional<StandardForm> reference_model;
};

/// How a run ended; decides the CLI exit status.
enum class RunOutcome {
  Success,          // V = 1
  Infeasible,       // Q = 1, V = 0 after FDC
  ExecutionFailed,  // Q = 0 after ECL
  Inconsistent,     // T = 0 after the rebuilds
  InputFailure,     // the problem text itself is unusable
  BackendFailure,   // transport, exhausted script, replies that never fit the schema
  ModelFailure,     // the backend's model could not be parsed or validated
  InternalError,
};

std::string_view to_string(RunOutcome o);
RunOutcome parse_run_outcome(std::string_view s);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunRecord {
  std::string problem_id;
  int trial = 1;
  std::uint64_t seed = 0;
  std::string ablation = "full";
  RunOutcome outcome = RunOutcome::InternalError;
  int Q = 0;
  int V = 0;
  int T = 0;
  int ecl_iterations = 0;
  int fdc_iterations = 0;
  /// Objective at the returned point in the sense of the source problem.
  std::optional<double> objective;
  std::optional<Eigen::VectorXd> x_star;
  std::string message;
  std::vector<StageTiming> timings;
  std::vector<Exchange> exchanges;
  /// Model, consistency, convexity report, strategy, code, outcomes, ECL/FDC
  /// state and feasibility residuals.
  nlohmann::json trace = nlohmann::json::object();
};

/// One JSON object; timings are omitted when `with_timings` is false so that
/// replayed runs compare byte for byte.
nlohmann::json to_json(const RunRecord& r, bool with_timings = true);
RunRecord record_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const ConvexityReport& r);

/// FNV-1a over "<id>#<trial>".
std::uint64_t trial_seed(std::string_view problem_id, int trial);

/// Runs the whole pipeline once. Never throws for per-run failures; they end
/// up in the record with Q = V = 0. A null backend uses the reference model.
RunRecord run_pipeline(const PipelineInput& input, LlmBackend* backend, const PipelineConfig& config,
                       int trial = 1);

}  // namespace optira
