#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "optira/error.hpp"

namespace optira {

/// Node kinds. Everything past `Power` is a registered atom called by name.
enum class Op : std::uint8_t {
  Constant,
  Variable,
  Sum,
  Product,
  Divide,
  Power,
  Exp,
  Log,
  Sqrt,
  Abs,
  Square,
  InvPos,
  Min,
  Max,
  Sign,
};

struct AtomInfo {
  Op op;
  std::string_view name;
  int arity;  // -1: variadic with at least two arguments
};

/// Atoms callable by name in the infix grammar.
std::span<const AtomInfo> atom_table();
std::optional<AtomInfo> find_atom(std::string_view name);
std::string_view op_name(Op op);

class Expr;

namespace detail {
struct Node {
  Op op = Op::Constant;
  double value = 0.0;  // constant value, or exponent for Power
  int index = -1;      // variable index
  std::string name;    // variable name
  std::vector<Expr> args;
};
}  // namespace detail

/// Immutable, shared expression tree. Copies are cheap and share structure.
///
/// Construction goes through the factory functions below, which flatten
/// nested sums/products and fold constants, so two expressions compare equal
/// exactly when their canonical trees match.
class Expr {
 public:
  Expr();  // the constant 0

  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  double exponent() const { return node_->value; }
  int index() const { return node_->index; }
  const std::string& name() const { return node_->name; }
  std::span<const Expr> args() const { return node_->args; }
  const Expr& arg(std::size_t i) const { return node_->args[i]; }

  bool is_constant() const { return op() == Op::Constant; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  friend Expr make_node(detail::Node node);

  std::shared_ptr<const detail::Node> node_;
};

Expr constant(double v);
Expr variable(int index, std::string name);
Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);
Expr divide(Expr numerator, Expr denominator);
Expr power(Expr base, double exponent);
/// Calls a registered atom. Throws ModelError on arity mismatch.
Expr call(Op atom, std::vector<Expr> args);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);

/// Indices of all variables referenced by `e`.
std::set<int> variables_of(const Expr& e);
/// Number of nodes in the tree.
std::size_t node_count(const Expr& e);
/// Replaces every occurrence of `target` (structurally) with `replacement`.
Expr substitute(const Expr& e, const Expr& target, const Expr& replacement);
/// Rebuilds the tree after remapping variable references.
Expr remap_variables(const Expr& e, const std::unordered_map<int, Expr>& mapping);

/// Top-level additive terms (the expression itself when it is not a sum).
std::vector<Expr> additive_terms(const Expr& e);

using Assignment = std::unordered_map<std::string, double>;

namespace detail {
[[noreturn]] void throw_domain(std::string_view what);
[[noreturn]] void throw_missing(const std::string& name, int index);
}  // namespace detail

/// Evaluates `e` at the point `x` (indexed by variable index).
///
/// Throws DomainError when an atom is applied outside its domain and
/// ModelError when `x` does not cover a referenced variable.
template <typename Scalar>
Scalar evaluate(const Expr& e, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sqrt;
  switch (e.op()) {
    case Op::Constant:
      return Scalar(e.value());
    case Op::Variable:
      if (e.index() < 0 || e.index() >= x.size()) detail::throw_missing(e.name(), e.index());
      return x[e.index()];
    case Op::Sum: {
      Scalar s(0);
      for (const Expr& a : e.args()) s += evaluate(a, x);
      return s;
    }
    case Op::Product: {
      Scalar p(1);
      for (const Expr& a : e.args()) p *= evaluate(a, x);
      return p;
    }
    case Op::Divide: {
      const Scalar den = evaluate(e.arg(1), x);
      if (den == Scalar(0)) detail::throw_domain("division by zero");
      return evaluate(e.arg(0), x) / den;
    }
    case Op::Power: {
      const Scalar base = evaluate(e.arg(0), x);
      const double p = e.exponent();
      const bool integral = std::floor(p) == p;
      if (base < Scalar(0) && !integral) detail::throw_domain("non-integer power of a negative value");
      if (base == Scalar(0) && p < 0) detail::throw_domain("negative power of zero");
      return pow(base, Scalar(p));
    }
    case Op::Exp:
      return exp(evaluate(e.arg(0), x));
    case Op::Log: {
      const Scalar v = evaluate(e.arg(0), x);
      if (!(v > Scalar(0))) detail::throw_domain("log of a non-positive value");
      return log(v);
    }
    case Op::Sqrt: {
      const Scalar v = evaluate(e.arg(0), x);
      if (v < Scalar(0)) detail::throw_domain("sqrt of a negative value");
      return sqrt(v);
    }
    case Op::Abs:
      return abs(evaluate(e.arg(0), x));
    case Op::Square: {
      const Scalar v = evaluate(e.arg(0), x);
      return v * v;
    }
    case Op::InvPos: {
      const Scalar v = evaluate(e.arg(0), x);
      if (!(v > Scalar(0))) detail::throw_domain("inv_pos of a non-positive value");
      return Scalar(1) / v;
    }
    case Op::Min:
    case Op::Max: {
      Scalar best = evaluate(e.arg(0), x);
      for (std::size_t i = 1; i < e.args().size(); ++i) {
        const Scalar v = evaluate(e.arg(i), x);
        best = e.op() == Op::Min ? (v < best ? v : best) : (v > best ? v : best);
      }
      return best;
    }
    case Op::Sign: {
      const Scalar v = evaluate(e.arg(0), x);
      return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
    }
  }
  detail::throw_domain("unknown node");
}

inline double evaluate(const Expr& e, const Eigen::VectorXd& x) { return evaluate<double>(e, x); }

/// Name-keyed evaluation; every referenced variable name must be assigned.
double evaluate(const Expr& e, const Assignment& assignment);

}  // namespace optira
