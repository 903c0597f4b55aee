#include "optira/model_json.hpp"

#include "optira/parse.hpp"

namespace optira {

using nlohmann::json;

namespace {

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double bound_from_json(const json& v, double fallback, const std::string& where) {
  if (v.is_null()) return fallback;
  if (!v.is_number()) throw SchemaError(where + " must be a number or null");
  return v.get<double>();
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(where + " is missing field '" + key + "'");
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

}  // namespace

json to_json(const StandardForm& p) {
  json doc;
  doc["format"] = kModelFormat;
  json vars = json::array();
  for (const Variable& v : p.variables) {
    vars.push_back({{"name", v.name},
                    {"type", std::string(to_string(v.type))},
                    {"lower", bound_to_json(v.lower)},
                    {"upper", bound_to_json(v.upper)},
                    {"unit", v.unit}});
  }
  doc["variables"] = std::move(vars);
  doc["objective"] = {{"sense", "minimize"}, {"expr", to_string(p.objective)}};
  json cons = json::array();
  for (const Constraint& c : p.inequalities) {
    cons.push_back({{"expr", to_string(c.lhs)}, {"relation", "<="}, {"provenance", c.provenance}});
  }
  for (const Constraint& c : p.equalities) {
    cons.push_back({{"expr", to_string(c.lhs)}, {"relation", "=="}, {"provenance", c.provenance}});
  }
  doc["constraints"] = std::move(cons);
  doc["metadata"] = {{"id", p.metadata.id},
                     {"text_digest", p.metadata.text_digest},
                     {"maximize", p.metadata.maximize}};
  return doc;
}

StandardForm model_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("model document must be an object");
  if (doc.contains("format") && doc["format"] != kModelFormat) {
    throw SchemaError("unsupported model format " + doc["format"].dump());
  }
  const json& vars = require(doc, "variables", "model");
  if (!vars.is_array()) throw SchemaError("model.variables must be an array");
  std::vector<Variable> variables;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string where = "model.variables[" + std::to_string(i) + "]";
    const json& v = vars[i];
    const std::string name = require_string(v, "name", where);
    const VarType type = v.contains("type") ? parse_var_type(require_string(v, "type", where))
                                            : VarType::Continuous;
    const double lo = bound_from_json(v.value("lower", json(nullptr)), -kInf, where + ".lower");
    const double hi = bound_from_json(v.value("upper", json(nullptr)), kInf, where + ".upper");
    std::string unit = v.contains("unit") ? require_string(v, "unit", where) : "";
    variables.push_back(make_variable(name, type, lo, hi, std::move(unit)));
  }

  const json& obj = require(doc, "objective", "model");
  const std::string sense_text = require_string(obj, "sense", "model.objective");
  Sense sense;
  if (sense_text == "minimize") {
    sense = Sense::Minimize;
  } else if (sense_text == "maximize") {
    sense = Sense::Maximize;
  } else {
    throw SchemaError("model.objective.sense must be 'minimize' or 'maximize'");
  }
  const Expr objective = parse_expression(require_string(obj, "expr", "model.objective"), variables);

  std::vector<RawConstraint> raw;
  const json& cons = doc.value("constraints", json::array());
  if (!cons.is_array()) throw SchemaError("model.constraints must be an array");
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const std::string where = "model.constraints[" + std::to_string(i) + "]";
    RawConstraint rc;
    rc.lhs = parse_expression(require_string(cons[i], "expr", where), variables);
    rc.rhs = constant(0.0);
    const std::string rel = require_string(cons[i], "relation", where);
    if (rel == "<=") {
      rc.relation = RawRelation::LessEqual;
    } else if (rel == ">=") {
      rc.relation = RawRelation::GreaterEqual;
    } else if (rel == "==") {
      rc.relation = RawRelation::Equal;
    } else {
      throw SchemaError(where + ".relation must be one of <=, >=, ==");
    }
    rc.provenance = cons[i].value("provenance", std::string("derived"));
    raw.push_back(std::move(rc));
  }

  ProblemMetadata meta;
  if (doc.contains("metadata") && doc["metadata"].is_object()) {
    const json& m = doc["metadata"];
    meta.id = m.value("id", std::string());
    meta.text_digest = m.value("text_digest", std::string());
    meta.maximize = m.value("maximize", false);
  }
  return canonicalize(sense, objective, raw, std::move(variables), std::move(meta));
}

std::string canonical_text(const json& doc) { return doc.dump(); }

}  // namespace optira
