#include "optira/model.hpp"

#include <cstdio>
#include <set>

#include "optira/parse.hpp"

namespace optira {

std::string_view to_string(VarType t) {
  switch (t) {
    case VarType::Continuous: return "continuous";
    case VarType::Integer: return "integer";
    case VarType::Binary: return "binary";
  }
  return "continuous";
}

VarType parse_var_type(std::string_view s) {
  if (s == "continuous") return VarType::Continuous;
  if (s == "integer") return VarType::Integer;
  if (s == "binary") return VarType::Binary;
  throw ModelError("unknown variable type '" + std::string(s) + "'");
}

Variable make_variable(std::string name, VarType type, double lower, double upper,
                       std::string unit) {
  if (type == VarType::Binary) {
    lower = std::max(lower, 0.0);
    upper = std::min(upper, 1.0);
  }
  if (!(lower <= upper)) {
    throw ModelError("variable '" + name + "' has lower bound above upper bound");
  }
  return Variable{std::move(name), type, lower, upper, std::move(unit)};
}

int StandardForm::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

bool StandardForm::has_integer_variables() const {
  for (const Variable& v : variables) {
    if (v.type != VarType::Continuous) return true;
  }
  return false;
}

namespace {
void check_references(const Expr& e, const StandardForm& p, std::string_view where) {
  if (e.op() == Op::Variable) {
    const int i = e.index();
    if (i < 0 || static_cast<std::size_t>(i) >= p.variables.size() ||
        p.variables[i].name != e.name()) {
      throw ModelError(std::string(where) + " references undeclared variable '" + e.name() + "'");
    }
    return;
  }
  for (const Expr& a : e.args()) check_references(a, p, where);
}
}  // namespace

void validate(const StandardForm& p) {
  std::set<std::string> names;
  for (const Variable& v : p.variables) {
    if (v.name.empty()) throw ModelError("variable with empty name");
    if (!names.insert(v.name).second) throw ModelError("duplicate variable '" + v.name + "'");
    if (!(v.lower <= v.upper)) throw ModelError("variable '" + v.name + "' has lower > upper");
    if (v.type == VarType::Binary && (v.lower < 0.0 || v.upper > 1.0)) {
      throw ModelError("binary variable '" + v.name + "' has bounds outside [0, 1]");
    }
  }
  check_references(p.objective, p, "objective");
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    if (p.inequalities[i].relation != Relation::LessEqual) {
      throw ModelError("inequality " + std::to_string(i) + " is not a <= 0 constraint");
    }
    check_references(p.inequalities[i].lhs, p, "inequality " + std::to_string(i));
  }
  for (std::size_t j = 0; j < p.equalities.size(); ++j) {
    if (p.equalities[j].relation != Relation::Equal) {
      throw ModelError("equality " + std::to_string(j) + " is not a == 0 constraint");
    }
    check_references(p.equalities[j].lhs, p, "equality " + std::to_string(j));
  }
}

std::string_view to_string(RawRelation r) {
  switch (r) {
    case RawRelation::LessEqual: return "<=";
    case RawRelation::GreaterEqual: return ">=";
    case RawRelation::Equal: return "==";
    case RawRelation::Less: return "<";
    case RawRelation::Greater: return ">";
  }
  return "?";
}

StandardForm canonicalize(Sense sense, const Expr& objective, const std::vector<RawConstraint>& raw,
                          std::vector<Variable> variables, ProblemMetadata metadata) {
  StandardForm p;
  p.variables = std::move(variables);
  p.metadata = std::move(metadata);
  if (sense == Sense::Maximize) {
    p.objective = -objective;
    p.metadata.maximize = !p.metadata.maximize;
  } else {
    p.objective = objective;
  }
  for (const RawConstraint& rc : raw) {
    switch (rc.relation) {
      case RawRelation::LessEqual:
        p.inequalities.push_back({rc.lhs - rc.rhs, Relation::LessEqual, rc.provenance});
        break;
      case RawRelation::GreaterEqual:
        p.inequalities.push_back({rc.rhs - rc.lhs, Relation::LessEqual, rc.provenance});
        break;
      case RawRelation::Equal:
        p.equalities.push_back({rc.lhs - rc.rhs, Relation::Equal, rc.provenance});
        break;
      case RawRelation::Less:
      case RawRelation::Greater:
        throw ModelError("strict inequality unsupported: '" + to_string(rc.lhs) + " " +
                         std::string(to_string(rc.relation)) + " " + to_string(rc.rhs) + "'");
    }
  }
  validate(p);
  return p;
}

Eigen::VectorXd lower_bounds(const StandardForm& p) {
  Eigen::VectorXd lo(p.dimension());
  for (std::size_t i = 0; i < p.dimension(); ++i) lo[i] = p.variables[i].lower;
  return lo;
}

Eigen::VectorXd upper_bounds(const StandardForm& p) {
  Eigen::VectorXd hi(p.dimension());
  for (std::size_t i = 0; i < p.dimension(); ++i) hi[i] = p.variables[i].upper;
  return hi;
}

Eigen::VectorXd project_to_box(const StandardForm& p, const Eigen::VectorXd& x) {
  return x.cwiseMax(lower_bounds(p)).cwiseMin(upper_bounds(p));
}

Eigen::VectorXd box_center(const StandardForm& p) {
  Eigen::VectorXd c(p.dimension());
  for (std::size_t i = 0; i < p.dimension(); ++i) {
    const Variable& v = p.variables[i];
    const bool lo = std::isfinite(v.lower);
    const bool hi = std::isfinite(v.upper);
    if (lo && hi) {
      c[i] = 0.5 * (v.lower + v.upper);
    } else if (lo) {
      c[i] = std::max(v.lower, 0.0);
    } else if (hi) {
      c[i] = std::min(v.upper, 0.0);
    } else {
      c[i] = 0.0;
    }
  }
  return c;
}

std::string text_digest(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace optira
