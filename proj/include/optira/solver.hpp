#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "optira/convexify.hpp"
#include "optira/curvature.hpp"
#include "optira/model.hpp"

namespace optira {

enum class SolveStatus { Optimal, MaxIter, InfeasibleSubproblem, NumericalFailure };

std::string_view to_string(SolveStatus s);
SolveStatus parse_solve_status(std::string_view s);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;

  double max() const;
};

struct Solution {
  Eigen::VectorXd x_star;
  double objective = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  KktResiduals kkt;
  int iterations = 0;
  /// Dual estimates for the inequalities and equalities of the solved problem.
  Eigen::VectorXd inequality_multipliers;
  Eigen::VectorXd equality_multipliers;
  /// SCA only: surrogate optimum and original objective after each outer step.
  std::vector<double> surrogate_trace;
  std::vector<double> objective_trace;
  int outer_iterations = 0;
  std::string message;
};

nlohmann::json to_json(const Solution& s);

struct SolverOptions {
  double tolerance = 1e-8;
  int max_inner = 500;
  int max_outer = 30;
  double sca_threshold = 1e-6;
  double damping = 1.0;
  /// Weight of the proximal term (tau/2)|x - x_m|^2 added to each SCA subproblem.
  double proximal = 1.0;
  std::optional<std::chrono::steady_clock::time_point> deadline;

  /// Throws InputError unless every field is positive and damping <= 1.
  void validate() const;
};

/// Barrier Newton method for a convex standard-form problem. Finite variable
/// bounds and inequalities get a log barrier; equalities an augmented
/// Lagrangian. Non-convex input throws SolverRejection; an exceeded deadline
/// throws TimeoutError. Everything else is reported through the status.
Solution solve_convex(const StandardForm& p, const Eigen::VectorXd& x0,
                      const SolverOptions& opts = {});

/// Successive convex approximation: convexify at x_m, solve, move towards the
/// subproblem optimum, stop when the original objective settles.
/// The returned objective is the original objective at x_star.
Solution sca_loop(const StandardForm& original, const ConvexityReport& report,
                  const Strategy& strategy, const Eigen::VectorXd& x0,
                  const SolverOptions& opts = {});

}  // namespace optira
