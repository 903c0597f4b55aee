#pragma once

#include <vector>

#include <Eigen/Dense>

#include "optira/expr.hpp"

namespace optira {

/// Symbolic partial derivative with respect to the variable at `index`.
///
/// Non-smooth atoms use the subgradient convention sign(0) = 0: abs'(0) = 0,
/// and min/max split ties evenly between their arguments.
Expr differentiate(const Expr& e, int index);

std::vector<Expr> gradient(const Expr& e, int dimension);

/// Expression with its gradient and (lower-triangular) Hessian precomputed.
class CompiledFunction {
 public:
  CompiledFunction() = default;
  CompiledFunction(Expr e, int dimension, bool with_hessian = true);

  const Expr& expression() const { return expr_; }
  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  /// Throws std::logic_error when compiled without a Hessian.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

 private:
  Expr expr_;
  int dimension_ = 0;
  std::vector<int> active_;                   // variables the expression depends on
  std::vector<Expr> gradient_;                // one per active variable
  std::vector<std::vector<Expr>> hessian_;    // hessian_[a][b], b <= a, over active variables
  bool has_hessian_ = false;
};

}  // namespace optira
