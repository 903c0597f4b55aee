#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optira/expr.hpp"
#include "optira/model.hpp"

#ifndef OPTIRA_SOURCE_DIR
#define OPTIRA_SOURCE_DIR "."
#endif

namespace optira::test {

inline std::string source_path(const std::string& rel) { return std::string(OPTIRA_SOURCE_DIR) + "/" + rel; }

inline std::vector<Variable> box_variables(int n, double lo, double hi) {
  std::vector<Variable> v;
  for (int i = 0; i < n; ++i) v.push_back(make_variable("x" + std::to_string(i + 1), VarType::Continuous, lo, hi));
  return v;
}

/// Random expressions that stay inside their domains for |x_i| <= 2.
class ExprGen {
 public:
  ExprGen(unsigned seed, std::vector<Variable> vars) : rng_(seed), vars_(std::move(vars)) {}

  Expr operator()(int depth) {
    if (depth <= 0 || pick(5) == 0) return leaf();
    switch (pick(13)) {
      case 0: return sum({(*this)(depth - 1), (*this)(depth - 1)});
      case 1: return product({(*this)(depth - 1), (*this)(depth - 1)});
      case 2: return divide((*this)(depth - 1), positive(depth - 1));
      case 3: {
        static const double exps[] = {2.0, 3.0, 0.5, -1.0, 1.5};
        return power(positive(depth - 1), exps[pick(5)]);
      }
      case 4: return call(Op::Exp, {product({constant(0.5), bounded(depth - 1)})});
      case 5: return call(Op::Log, {positive(depth - 1)});
      case 6: return call(Op::Sqrt, {positive(depth - 1)});
      case 7: return call(Op::Abs, {(*this)(depth - 1)});
      case 8: return call(Op::Square, {(*this)(depth - 1)});
      case 9: return call(Op::InvPos, {positive(depth - 1)});
      case 10: return call(Op::Min, {(*this)(depth - 1), (*this)(depth - 1)});
      case 11: return call(Op::Max, {(*this)(depth - 1), (*this)(depth - 1)});
      default: return sum({product({constant(coef()), (*this)(depth - 1)}), leaf()});
    }
  }

  Eigen::VectorXd point(double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd x(static_cast<Eigen::Index>(vars_.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = u(rng_);
    return x;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  double coef() { return std::uniform_real_distribution<double>(-2.0, 2.0)(rng_); }

  Expr leaf() {
    if (pick(3) == 0) return constant(std::round(coef() * 100.0) / 100.0);
    const int i = pick(static_cast<int>(vars_.size()));
    return variable(i, vars_[static_cast<std::size_t>(i)].name);
  }
  // 1 + e^2 > 0 everywhere.
  Expr positive(int depth) { return sum({constant(1.0), call(Op::Square, {(*this)(depth)})}); }
  // |tanh-like| keeps exp arguments small: e / (1 + e^2) lies in [-1/2, 1/2].
  Expr bounded(int depth) {
    const Expr e = (*this)(depth);
    return divide(e, sum({constant(1.0), call(Op::Square, {e})}));
  }

  std::mt19937_64 rng_;
  std::vector<Variable> vars_;
};

/// Largest violation of constraints, bounds and integrality, recomputed from scratch.
inline double worst_residual(const StandardForm& p, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (const Constraint& c : p.inequalities) worst = std::max(worst, evaluate(c.lhs, x));
  for (const Constraint& c : p.equalities) worst = std::max(worst, std::abs(evaluate(c.lhs, x)));
  for (std::size_t k = 0; k < p.dimension(); ++k) {
    const double xi = x[static_cast<Eigen::Index>(k)];
    worst = std::max({worst, p.variables[k].lower - xi, xi - p.variables[k].upper});
    if (p.variables[k].type != VarType::Continuous) worst = std::max(worst, std::abs(xi - std::round(xi)));
  }
  return worst;
}

}  // namespace optira::test
