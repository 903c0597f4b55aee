#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optira/expr.hpp"

namespace optira {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarType { Continuous, Integer, Binary };

std::string_view to_string(VarType t);
VarType parse_var_type(std::string_view s);

struct Variable {
  std::string name;
  VarType type = VarType::Continuous;
  double lower = -kInf;
  double upper = kInf;
  std::string unit;
};

/// Builds a variable, checking lower <= upper. Binary variables default to [0, 1]
/// and must stay inside it.
Variable make_variable(std::string name, VarType type = VarType::Continuous, double lower = -kInf,
                       double upper = kInf, std::string unit = {});

/// Canonical relations only: lhs <= 0 or lhs == 0.
enum class Relation { LessEqual, Equal };

struct Constraint {
  Expr lhs;
  Relation relation = Relation::LessEqual;
  std::string provenance = "derived";
};

struct ProblemMetadata {
  std::string id;
  std::string text_digest;
  bool maximize = false;  // the source objective was a maximization
};

/// minimize objective  s.t.  inequalities[i] <= 0,  equalities[j] == 0.
struct StandardForm {
  std::vector<Variable> variables;
  Expr objective;
  std::vector<Constraint> inequalities;
  std::vector<Constraint> equalities;
  ProblemMetadata metadata;

  std::size_t m() const { return inequalities.size(); }
  std::size_t n() const { return equalities.size(); }
  std::size_t dimension() const { return variables.size(); }
  int index_of(std::string_view name) const;
  bool has_integer_variables() const;
};

/// Throws ModelError if any expression references an undeclared variable,
/// a relation is misfiled, or variable declarations are inconsistent.
void validate(const StandardForm& p);

/// Relations accepted before canonicalization.
enum class RawRelation { LessEqual, GreaterEqual, Equal, Less, Greater };

std::string_view to_string(RawRelation r);

struct RawConstraint {
  Expr lhs;
  RawRelation relation = RawRelation::LessEqual;
  Expr rhs;
  std::string provenance = "derived";
};

enum class Sense { Minimize, Maximize };

/// Rewrites a problem into standard form: maximize f becomes minimize -f,
/// a >= b becomes b - a <= 0, a <= b becomes a - b <= 0. Strict inequalities
/// are rejected with ModelError.
StandardForm canonicalize(Sense sense, const Expr& objective, const std::vector<RawConstraint>& raw,
                          std::vector<Variable> variables, ProblemMetadata metadata = {});

/// Box bounds of the declared variables.
Eigen::VectorXd lower_bounds(const StandardForm& p);
Eigen::VectorXd upper_bounds(const StandardForm& p);
/// Clamps x onto the variable box.
Eigen::VectorXd project_to_box(const StandardForm& p, const Eigen::VectorXd& x);
/// Box midpoint; unbounded coordinates sit at 0 (or at the finite bound when one-sided).
Eigen::VectorXd box_center(const StandardForm& p);

/// Short hex digest of a text (FNV-1a 64).
std::string text_digest(std::string_view text);

}  // namespace optira
