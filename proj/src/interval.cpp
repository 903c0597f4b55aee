#include "optira/interval.hpp"

#include <algorithm>
#include <array>

namespace optira {

namespace {
// 0 * inf between closed endpoints is attained as 0.
double mul0(double a, double b) {
  const double v = a * b;
  return std::isnan(v) ? 0.0 : v;
}
}  // namespace

Interval operator+(Interval a, Interval b) {
  double lo = a.lo + b.lo;
  double hi = a.hi + b.hi;
  if (std::isnan(lo)) lo = -kInf;
  if (std::isnan(hi)) hi = kInf;
  return {lo, hi};
}

Interval operator*(Interval a, Interval b) {
  const std::array<double, 4> p{mul0(a.lo, b.lo), mul0(a.lo, b.hi), mul0(a.hi, b.lo),
                                mul0(a.hi, b.hi)};
  return {*std::min_element(p.begin(), p.end()), *std::max_element(p.begin(), p.end())};
}

Interval operator/(Interval a, Interval b) {
  if (b.contains(0.0)) return {};
  return a * Interval{1.0 / b.hi, 1.0 / b.lo};
}

Interval pow(Interval a, double p) {
  if (p == 0.0) return {1.0, 1.0};
  if (p == 1.0) return a;
  const bool integral = std::floor(p) == p;
  if (integral) {
    const bool even = std::fmod(p, 2.0) == 0.0;
    if (p > 0) {
      const double l = std::pow(a.lo, p);
      const double h = std::pow(a.hi, p);
      if (!even) return {l, h};
      if (a.lo >= 0) return {l, h};
      if (a.hi <= 0) return {h, l};
      return {0.0, std::max(l, h)};
    }
    if (a.contains(0.0)) return {};
    const double l = std::pow(a.lo, p);
    const double h = std::pow(a.hi, p);
    return {std::min(l, h), std::max(l, h)};
  }
  // Non-integer powers are only defined on the nonnegative part.
  const double lo = std::max(a.lo, 0.0);
  if (a.hi < 0.0) return {};
  if (p > 0) return {std::pow(lo, p), std::pow(a.hi, p)};
  return {std::pow(a.hi, p), std::pow(lo, p)};
}

Interval exp(Interval a) { return {std::exp(a.lo), std::exp(a.hi)}; }

Interval log(Interval a) {
  const double lo = a.lo > 0 ? std::log(a.lo) : -kInf;
  const double hi = a.hi > 0 ? std::log(a.hi) : -kInf;
  return {lo, hi};
}

Interval sqrt(Interval a) {
  return {std::sqrt(std::max(a.lo, 0.0)), a.hi >= 0 ? std::sqrt(a.hi) : 0.0};
}

Interval abs(Interval a) {
  if (a.lo >= 0) return a;
  if (a.hi <= 0) return {-a.hi, -a.lo};
  return {0.0, std::max(-a.lo, a.hi)};
}

Interval hull(Interval a, Interval b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

std::vector<Interval> variable_intervals(const std::vector<Variable>& vars) {
  std::vector<Interval> box;
  box.reserve(vars.size());
  for (const Variable& v : vars) box.push_back({v.lower, v.upper});
  return box;
}

Interval range_of(const Expr& e, std::span<const Interval> box) {
  switch (e.op()) {
    case Op::Constant:
      return {e.value(), e.value()};
    case Op::Variable:
      if (e.index() >= 0 && static_cast<std::size_t>(e.index()) < box.size()) return box[e.index()];
      return {};
    case Op::Sum: {
      Interval r{0.0, 0.0};
      for (const Expr& a : e.args()) r = r + range_of(a, box);
      return r;
    }
    case Op::Product: {
      Interval r{1.0, 1.0};
      for (const Expr& a : e.args()) r = r * range_of(a, box);
      return r;
    }
    case Op::Divide:
      return range_of(e.arg(0), box) / range_of(e.arg(1), box);
    case Op::Power:
      return pow(range_of(e.arg(0), box), e.exponent());
    case Op::Exp:
      return exp(range_of(e.arg(0), box));
    case Op::Log:
      return log(range_of(e.arg(0), box));
    case Op::Sqrt:
      return sqrt(range_of(e.arg(0), box));
    case Op::Abs:
      return abs(range_of(e.arg(0), box));
    case Op::Square:
      return pow(range_of(e.arg(0), box), 2.0);
    case Op::InvPos: {
      const Interval a = range_of(e.arg(0), box);
      const double lo = std::max(a.lo, 0.0);
      if (a.hi <= 0) return {};
      return {1.0 / a.hi, lo > 0 ? 1.0 / lo : kInf};
    }
    case Op::Min:
    case Op::Max: {
      Interval r = range_of(e.arg(0), box);
      for (std::size_t i = 1; i < e.args().size(); ++i) {
        const Interval b = range_of(e.arg(i), box);
        r = e.op() == Op::Min ? Interval{std::min(r.lo, b.lo), std::min(r.hi, b.hi)}
                              : Interval{std::max(r.lo, b.lo), std::max(r.hi, b.hi)};
      }
      return r;
    }
    case Op::Sign: {
      const Interval a = range_of(e.arg(0), box);
      if (a.lo > 0) return {1.0, 1.0};
      if (a.hi < 0) return {-1.0, -1.0};
      return {a.lo < 0 ? -1.0 : 0.0, a.hi > 0 ? 1.0 : 0.0};
    }
  }
  return {};
}

}  // namespace optira
