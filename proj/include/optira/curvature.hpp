#pragma once

#include <span>
#include <string>
#include <vector>

#include "optira/interval.hpp"
#include "optira/model.hpp"

namespace optira {

enum class Curvature { Constant, Affine, Convex, Concave, Unknown };
enum class Sign { Nonneg, Nonpos, Unknown };

std::string_view to_string(Curvature c);
std::string_view to_string(Sign s);

bool is_convex(Curvature c);   // constant, affine or convex
bool is_concave(Curvature c);  // constant, affine or concave
bool is_affine(Curvature c);   // constant or affine

struct CurvatureResult {
  Curvature curvature = Curvature::Unknown;
  Sign sign = Sign::Unknown;
  /// Set when the label came from sampling the second derivative rather than
  /// from the composition rules: sampled, not proven.
  bool sampled = false;
  /// Why the rules failed when the curvature is unknown.
  std::string reason;
};

/// Number of second-derivative samples used to label univariate sub-expressions
/// the composition rules cannot classify.
inline constexpr int kCurvatureSamples = 33;

/// Classifies `e` over the box using composition rules; falls back to sampling
/// the second derivative for univariate sub-expressions. Total function.
CurvatureResult curvature_of(const Expr& e, std::span<const Interval> box);

enum class ComponentKind { Objective, Inequality, Equality, VariableType };

struct Location {
  ComponentKind kind = ComponentKind::Objective;
  std::size_t index = 0;

  friend bool operator==(const Location&, const Location&) = default;
};

std::string describe(const Location& loc);

struct Offender {
  Location location;
  Expr expression;  // the offending sub-expression (an additive term when isolable)
  std::string reason;
};

struct ConvexityReport {
  bool problem_convex = true;
  std::vector<Offender> offenders;
  /// Some component was only labeled convex by sampling.
  bool sampled = false;
};

/// A problem is convex iff its objective is convex, every inequality is convex,
/// every equality is affine, and all variables are continuous. "Unknown" counts
/// as non-convex.
ConvexityReport analyze_problem(const StandardForm& p);

}  // namespace optira
