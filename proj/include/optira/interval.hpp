#pragma once

#include <span>
#include <vector>

#include "optira/expr.hpp"
#include "optira/model.hpp"

namespace optira {

/// Closed interval over the extended reals. Operations are conservative:
/// the true range of an expression over a box always lies inside the result.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool nonneg() const { return lo >= 0.0; }
  bool nonpos() const { return hi <= 0.0; }
  bool positive() const { return lo > 0.0; }
  bool negative() const { return hi < 0.0; }
  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

Interval operator+(Interval a, Interval b);
Interval operator*(Interval a, Interval b);
Interval operator/(Interval a, Interval b);
Interval pow(Interval a, double p);
Interval exp(Interval a);
Interval log(Interval a);
Interval sqrt(Interval a);
Interval abs(Interval a);
Interval hull(Interval a, Interval b);

std::vector<Interval> variable_intervals(const std::vector<Variable>& vars);

/// Range enclosure of `e` over the box.
Interval range_of(const Expr& e, std::span<const Interval> box);

}  // namespace optira
