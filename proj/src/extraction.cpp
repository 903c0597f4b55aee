#include "optira/extraction.hpp"

#include <cmath>
#include <set>

#include "optira/error.hpp"
#include "optira/model_json.hpp"
#include "optira/parse.hpp"
#include "optira/prompts.hpp"
#include "optira/units.hpp"

namespace optira {

using nlohmann::json;

namespace {

constexpr const char* kSetsSchema =
    R"({"variables": [{"name": str, "type": "continuous|integer|binary", "unit": str}],
 "objective": {"sense": "minimize|maximize", "description": str, "variables": [str]},
 "constraints": [{"variable": str, "value": number, "unit": str, "source": str}]})";

constexpr const char* kConsistencySchema =
    R"({"xi1": bool, "xi2": bool, "explanations": {"xi1": str, "xi2": str}})";

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw SchemaError(where + " has unexpected field '" + k + "'");
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw SchemaError(where + " is missing field '" + key + "'");
  return obj.at(key);
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

Sense parse_sense(const std::string& s, const std::string& where) {
  if (s == "minimize") return Sense::Minimize;
  if (s == "maximize") return Sense::Maximize;
  throw SchemaError(where + " must be 'minimize' or 'maximize'");
}

VarType var_type_field(const json& obj, const std::string& where) {
  try {
    return parse_var_type(string_field(obj, "type", where));
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception&) {
    throw SchemaError(where + ".type must be continuous, integer or binary");
  }
}

/// Asks once; on a schema violation asks the reformat stage once more.
template <typename Parse>
auto ask_structured(Conversation& conv, Stage stage, const std::string& prompt, const char* schema,
                    Parse parse) {
  const std::string reply = conv.ask(stage, prompt);
  try {
    return parse(reply);
  } catch (const SchemaError& first) {
    const std::string retry = render_prompt(Stage::Reformat, conv.problem_id(),
                                            {{"failed_stage", std::string(to_string(stage))},
                                             {"error", first.what()},
                                             {"response", reply},
                                             {"schema", schema}});
    const std::string second = conv.ask(Stage::Reformat, retry);
    try {
      return parse(second);
    } catch (const SchemaError& e) {
      throw SchemaError(std::string(to_string(stage)) +
                        " reply violates the schema after one reformat retry: " + e.what());
    }
  }
}

}  // namespace

json fenced_json(const std::string& reply) {
  const auto block = fenced_block(reply);
  if (!block) throw SchemaError("reply has no fenced block");
  try {
    return json::parse(*block);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("fenced block is not JSON: ") + e.what());
  }
}

json to_json(const ExtractionSets& s) {
  json vars = json::array();
  for (const auto& v : s.E) {
    vars.push_back({{"name", v.name}, {"type", std::string(to_string(v.type))}, {"unit", v.unit}});
  }
  json cons = json::array();
  for (const auto& c : s.Rc) {
    cons.push_back({{"variable", c.variable}, {"value", c.value}, {"unit", c.unit}, {"source", c.source}});
  }
  return {{"variables", vars},
          {"objective",
           {{"sense", s.O.sense == Sense::Minimize ? "minimize" : "maximize"},
            {"description", s.O.description},
            {"variables", s.O.variables}}},
          {"constraints", cons}};
}

ExtractionSets sets_from_json(const json& doc) {
  only_keys(doc, {"variables", "objective", "constraints"}, "sets");
  ExtractionSets s;
  const json& vars = field(doc, "variables", "sets");
  if (!vars.is_array()) throw SchemaError("sets.variables must be an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string where = "sets.variables[" + std::to_string(i) + "]";
    only_keys(vars[i], {"name", "type", "unit"}, where);
    ExtractedVariable v;
    v.name = string_field(vars[i], "name", where);
    v.type = var_type_field(vars[i], where);
    v.unit = string_field(vars[i], "unit", where);
    if (v.name.empty()) throw SchemaError(where + ".name must not be empty");
    if (!names.insert(v.name).second) throw SchemaError(where + " repeats variable '" + v.name + "'");
    s.E.push_back(std::move(v));
  }
  const json& obj = field(doc, "objective", "sets");
  only_keys(obj, {"sense", "description", "variables"}, "sets.objective");
  s.O.sense = parse_sense(string_field(obj, "sense", "sets.objective"), "sets.objective.sense");
  s.O.description = string_field(obj, "description", "sets.objective");
  const json& ov = field(obj, "variables", "sets.objective");
  if (!ov.is_array()) throw SchemaError("sets.objective.variables must be an array");
  for (const json& n : ov) {
    if (!n.is_string()) throw SchemaError("sets.objective.variables must hold strings");
    s.O.variables.push_back(n.get<std::string>());
  }
  const json& cons = field(doc, "constraints", "sets");
  if (!cons.is_array()) throw SchemaError("sets.constraints must be an array");
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const std::string where = "sets.constraints[" + std::to_string(i) + "]";
    only_keys(cons[i], {"variable", "value", "unit", "source"}, where);
    ConstraintValue c;
    c.variable = string_field(cons[i], "variable", where);
    if (!names.count(c.variable)) {
      throw SchemaError(where + ".variable '" + c.variable + "' is not among the extracted variables");
    }
    const json& value = field(cons[i], "value", where);
    if (!value.is_number()) throw SchemaError(where + ".value must be a number");
    c.value = value.get<double>();
    c.unit = string_field(cons[i], "unit", where);
    c.source = string_field(cons[i], "source", where);
    s.Rc.push_back(std::move(c));
  }
  return s;
}

ExtractionSets extract_sets(const std::string& text, Conversation& conversation) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw InputError("empty input");
  const std::string prompt = render_prompt(Stage::Extract, conversation.problem_id(), {{"text", text}});
  ExtractionSets sets = ask_structured(conversation, Stage::Extract, prompt, kSetsSchema,
                                       [](const std::string& r) { return sets_from_json(fenced_json(r)); });
  if (sets.E.empty()) throw ModelError("no optimization variables found");
  return sets;
}

StandardForm model_from_proposal(const json& proposal, const ExtractionSets& sets,
                                 const ProblemMetadata& metadata) {
  if (!proposal.is_object()) throw SchemaError("model proposal must be an object");
  std::vector<Variable> variables;
  if (proposal.contains("variables")) {
    const json& vars = proposal["variables"];
    if (!vars.is_array()) throw SchemaError("model.variables must be an array");
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const std::string where = "model.variables[" + std::to_string(i) + "]";
      const json& v = vars[i];
      auto bound = [&](const char* key, double fallback) {
        if (!v.contains(key) || v[key].is_null()) return fallback;
        if (!v[key].is_number()) throw SchemaError(where + "." + key + " must be a number or null");
        return v[key].get<double>();
      };
      const VarType type = v.contains("type") ? var_type_field(v, where) : VarType::Continuous;
      variables.push_back(make_variable(string_field(v, "name", where), type, bound("lower", -kInf),
                                        bound("upper", kInf), v.value("unit", std::string())));
    }
  } else {
    for (const auto& e : sets.E) variables.push_back(make_variable(e.name, e.type, -kInf, kInf, e.unit));
  }
  const json& obj = field(proposal, "objective", "model");
  const Sense sense = parse_sense(string_field(obj, "sense", "model.objective"), "model.objective.sense");
  const Expr objective = parse_expression(string_field(obj, "expr", "model.objective"), variables);
  std::vector<RawConstraint> raw;
  const json cons = proposal.value("constraints", json::array());
  if (!cons.is_array()) throw SchemaError("model.constraints must be an array");
  for (const json& c : cons) {
    if (!c.is_string()) throw SchemaError("model.constraints must hold relation strings");
    RawConstraint rc = parse_relation(c.get<std::string>(), variables);
    rc.provenance = c.get<std::string>();
    raw.push_back(std::move(rc));
  }
  return canonicalize(sense, objective, raw, std::move(variables), metadata);
}

StandardForm build_model(const ExtractionSets& sets, const std::string& text,
                         Conversation& conversation, const std::string& feedback) {
  ProblemMetadata meta;
  meta.id = conversation.problem_id();
  meta.text_digest = text_digest(text);
  const std::string sets_text = to_json(sets).dump(2);
  const std::string prompt =
      render_prompt(Stage::Model, conversation.problem_id(),
                    {{"text", text},
                     {"sets", sets_text},
                     {"feedback", feedback.empty() ? "" : "\nPrevious model was rejected: " + feedback + "\n"}});
  const std::string reply = conversation.ask(Stage::Model, prompt);
  auto attempt = [&](const std::string& r) { return model_from_proposal(fenced_json(r), sets, meta); };
  try {
    return attempt(reply);
  } catch (const Error& first) {
    const std::string repair = render_prompt(Stage::RepairModel, conversation.problem_id(),
                                             {{"text", text}, {"error", first.what()}, {"response", reply}});
    try {
      return attempt(conversation.ask(Stage::RepairModel, repair));
    } catch (const BackendError&) {
      throw;
    } catch (const Error& e) {
      throw ModelError(std::string("unparseable model after repair: ") + e.what());
    }
  }
}

json to_json(const ConsistencyReport& r) {
  return {{"xi1", r.xi1}, {"xi2", r.xi2}, {"xi3", r.xi3}, {"xi4", r.xi4},
          {"T", r.T},     {"explanations", r.explanations}};
}

bool check_variable_types(const StandardForm& model, const ExtractionSets& sets, std::string& why) {
  for (const auto& e : sets.E) {
    const int k = model.index_of(e.name);
    if (k < 0) {
      why = "variable '" + e.name + "' is missing from the model";
      return false;
    }
    const VarType t = model.variables[static_cast<std::size_t>(k)].type;
    if (t != e.type) {
      why = "variable '" + e.name + "' is " + std::string(to_string(e.type)) + " in the extraction but " +
            std::string(to_string(t)) + " in the model";
      return false;
    }
  }
  why = "variable types match";
  return true;
}

namespace {
void collect_constants(const Expr& e, std::vector<double>& out) {
  if (e.op() == Op::Constant) out.push_back(std::abs(e.value()));
  for (const Expr& a : e.args()) collect_constants(a, out);
}
}  // namespace

bool check_constraint_values(const StandardForm& model, const ExtractionSets& sets, std::string& why) {
  std::vector<double> constants;
  for (const Constraint& c : model.inequalities) collect_constants(c.lhs, constants);
  for (const Constraint& c : model.equalities) collect_constants(c.lhs, constants);
  for (const Variable& v : model.variables) {
    if (std::isfinite(v.lower)) constants.push_back(std::abs(v.lower));
    if (std::isfinite(v.upper)) constants.push_back(std::abs(v.upper));
  }
  for (const auto& c : sets.Rc) {
    std::string unit;
    const int k = model.index_of(c.variable);
    if (k >= 0) unit = model.variables[static_cast<std::size_t>(k)].unit;
    if (unit.empty()) {
      for (const auto& e : sets.E) {
        if (e.name == c.variable) unit = e.unit;
      }
    }
    const auto converted = convert_unit(c.value, c.unit, unit);
    if (!converted) {
      why = "cannot convert " + format_number(c.value) + " " + c.unit + " to '" + unit + "' for " + c.variable;
      return false;
    }
    const double target = std::abs(*converted);
    const bool found = std::any_of(constants.begin(), constants.end(), [&](double v) {
      return std::abs(v - target) <= 1e-9 * std::max(std::abs(v), target) || v == target;
    });
    if (!found) {
      why = "constraint value " + format_number(c.value) + " " + c.unit + " (\"" + c.source +
            "\") does not appear in any constraint";
      return false;
    }
  }
  why = "all constraint values appear in the model";
  return true;
}

ConsistencyReport validate_consistency(const StandardForm& model, const ExtractionSets& sets,
                                       const std::string& text, Conversation& conversation) {
  ConsistencyReport r;
  const std::string prompt = render_prompt(Stage::Consistency, conversation.problem_id(),
                                           {{"text", text},
                                            {"sets", to_json(sets).dump(2)},
                                            {"model", to_json(model).dump(2)}});
  struct Judgement {
    bool xi1, xi2;
    std::map<std::string, std::string> why;
  };
  const Judgement j = ask_structured(
      conversation, Stage::Consistency, prompt, kConsistencySchema, [](const std::string& reply) {
        const json doc = fenced_json(reply);
        only_keys(doc, {"xi1", "xi2", "explanations"}, "consistency");
        const json& a = field(doc, "xi1", "consistency");
        const json& b = field(doc, "xi2", "consistency");
        if (!a.is_boolean() || !b.is_boolean()) throw SchemaError("consistency.xi1/xi2 must be booleans");
        Judgement out{a.get<bool>(), b.get<bool>(), {}};
        if (doc.contains("explanations")) {
          const json& ex = doc["explanations"];
          if (!ex.is_object()) throw SchemaError("consistency.explanations must be an object");
          for (const auto& [k, v] : ex.items()) {
            if (!v.is_string()) throw SchemaError("consistency.explanations values must be strings");
            out.why[k] = v.get<std::string>();
          }
        }
        return out;
      });
  r.xi1 = j.xi1;
  r.xi2 = j.xi2;
  r.explanations = j.why;
  std::string why;
  r.xi3 = check_variable_types(model, sets, why);
  r.explanations["xi3"] = why;
  r.xi4 = check_constraint_values(model, sets, why);
  r.explanations["xi4"] = why;
  r.T = r.xi1 && r.xi2 && r.xi3 && r.xi4 ? 1 : 0;
  return r;
}

ConstructedModel construct_model(const std::string& text, Conversation& conversation) {
  ConstructedModel out;
  out.sets = extract_sets(text, conversation);
  std::string feedback;
  for (int attempt = 0;; ++attempt) {
    out.model = build_model(out.sets, text, conversation, feedback);
    out.consistency = validate_consistency(out.model, out.sets, text, conversation);
    if (out.consistency.T == 1 || attempt == kMaxConsistencyRebuilds) return out;
    ++out.rebuilds;
    feedback.clear();
    for (const char* key : {"xi1", "xi2", "xi3", "xi4"}) {
      const bool ok = key[2] == '1'   ? out.consistency.xi1
                      : key[2] == '2' ? out.consistency.xi2
                      : key[2] == '3' ? out.consistency.xi3
                                      : out.consistency.xi4;
      if (!ok) feedback += std::string(key) + ": " + out.consistency.explanations[key] + "; ";
    }
  }
}

}  // namespace optira
