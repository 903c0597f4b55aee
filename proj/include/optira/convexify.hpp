#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "optira/curvature.hpp"
#include "optira/model.hpp"

namespace optira {

enum class StrategyKind { SCA, Lagrangian, ContinuousRelaxation, Composite };

/// How the initial SCA anchor is chosen when no explicit anchor is given.
enum class AnchorPolicy {
  Start,      // the supplied starting point
  BoxCenter,  // re-centered on the variable box
  Perturbed,  // box center shifted by a deterministic, attempt-dependent offset
};

std::string_view to_string(StrategyKind k);
std::string_view to_string(AnchorPolicy a);

struct Strategy {
  StrategyKind kind = StrategyKind::SCA;
  /// Components of a Composite strategy, applied in order.
  std::vector<StrategyKind> parts;
  /// Lagrangian multipliers keyed by inequality index; all >= 0.
  std::map<std::size_t, double> multipliers;
  AnchorPolicy anchor_policy = AnchorPolicy::Start;
  int perturbation = 0;
  std::optional<Eigen::VectorXd> anchor;

  bool uses(StrategyKind k) const;
  std::string label() const;
};

nlohmann::json to_json(const Strategy& s);
Strategy strategy_from_json(const nlohmann::json& doc);

/// Resolves the SCA anchor: explicit anchor, else the policy applied to `start`.
/// Always inside the variable box.
Eigen::VectorXd resolve_anchor(const Strategy& s, const StandardForm& p,
                               const Eigen::VectorXd& start);

struct ComponentMapping {
  Location surrogate;  // where the component lives in the surrogate
  Location original;   // where it came from
  std::string transform;  // "kept", "linearized", "partially linearized", "relaxed into objective"
};

struct ConvexifiedProblem {
  StandardForm surrogate;
  Strategy strategy;
  Eigen::VectorXd anchor;
  std::vector<ComponentMapping> mapping;
  /// Number of sub-expressions replaced by their first-order surrogate.
  int linearized = 0;
};

/// First-order surrogate f(x_m) + sum_i df/dx_i(x_m) (x_i - x_m,i).
/// Throws DomainError if `e` or its gradient cannot be evaluated at the anchor.
Expr sca_surrogate(const Expr& e, const Eigen::VectorXd& anchor);

/// Replaces the offending components listed in `report` according to `strategy`.
/// The result is always convex per analyze_problem; otherwise ConvexificationError.
ConvexifiedProblem convexify(const StandardForm& p, const ConvexityReport& report,
                             const Strategy& strategy, const Eigen::VectorXd& start);
ConvexifiedProblem convexify(const StandardForm& p, const ConvexityReport& report,
                             const Strategy& strategy);

/// Deterministic schedule over re-analysis attempts:
///   0: ContinuousRelaxation + SCA when integer variables are present, else SCA
///   1: SCA re-centered on the box
///   2: Lagrangian (multipliers 1.0 on every offending inequality) + SCA
///   3+: the same cycle with perturbed anchors.
Strategy select_strategy(const ConvexityReport& report, int attempt);

}  // namespace optira
