#include "optira/curvature.hpp"

#include "optira/differentiate.hpp"
#include "optira/parse.hpp"

namespace optira {

std::string_view to_string(Curvature c) {
  switch (c) {
    case Curvature::Constant: return "constant";
    case Curvature::Affine: return "affine";
    case Curvature::Convex: return "convex";
    case Curvature::Concave: return "concave";
    case Curvature::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Sign s) {
  switch (s) {
    case Sign::Nonneg: return "nonneg";
    case Sign::Nonpos: return "nonpos";
    case Sign::Unknown: return "unknown";
  }
  return "unknown";
}

bool is_convex(Curvature c) {
  return c == Curvature::Constant || c == Curvature::Affine || c == Curvature::Convex;
}
bool is_concave(Curvature c) {
  return c == Curvature::Constant || c == Curvature::Affine || c == Curvature::Concave;
}
bool is_affine(Curvature c) { return c == Curvature::Constant || c == Curvature::Affine; }

std::string describe(const Location& loc) {
  switch (loc.kind) {
    case ComponentKind::Objective: return "objective";
    case ComponentKind::Inequality: return "inequality " + std::to_string(loc.index);
    case ComponentKind::Equality: return "equality " + std::to_string(loc.index);
    case ComponentKind::VariableType: return "variable " + std::to_string(loc.index);
  }
  return "?";
}

namespace {

enum class Mono { Nondecreasing, Nonincreasing, None };

struct Info {
  Curvature curvature = Curvature::Unknown;
  Interval range;
  bool sampled = false;
  std::string reason;
};

Curvature flip(Curvature c) {
  if (c == Curvature::Convex) return Curvature::Concave;
  if (c == Curvature::Concave) return Curvature::Convex;
  return c;
}

Curvature add(Curvature a, Curvature b) {
  if (a == Curvature::Unknown || b == Curvature::Unknown) return Curvature::Unknown;
  if (a == Curvature::Constant) return b;
  if (b == Curvature::Constant) return a;
  if (a == Curvature::Affine) return b;
  if (b == Curvature::Affine) return a;
  return a == b ? a : Curvature::Unknown;
}

/// Curvature of coefficient * f where the coefficient ranges over `k`.
Curvature scale(Curvature f, Interval k) {
  if (k.lo == 0.0 && k.hi == 0.0) return Curvature::Constant;
  if (is_affine(f)) return f;
  if (k.nonneg()) return f;
  if (k.nonpos()) return flip(f);
  return Curvature::Unknown;
}

/// f(g) for a convex or concave atom f with monotonicity `mono` over g's range.
Info compose(std::string_view atom, Curvature f, Mono mono, const Info& g, Interval range) {
  Info out;
  out.range = range;
  out.sampled = g.sampled;
  if (g.curvature == Curvature::Constant) {
    out.curvature = Curvature::Constant;
    return out;
  }
  if (g.curvature == Curvature::Unknown) {
    out.reason = g.reason + " inside " + std::string(atom);
    return out;
  }
  const bool affine = is_affine(g.curvature);
  const bool ok_convex = affine || (mono == Mono::Nondecreasing && is_convex(g.curvature)) ||
                         (mono == Mono::Nonincreasing && is_concave(g.curvature));
  const bool ok_concave = affine || (mono == Mono::Nondecreasing && is_concave(g.curvature)) ||
                          (mono == Mono::Nonincreasing && is_convex(g.curvature));
  if (f == Curvature::Convex && ok_convex) {
    out.curvature = Curvature::Convex;
  } else if (f == Curvature::Concave && ok_concave) {
    out.curvature = Curvature::Concave;
  } else {
    out.reason = std::string(to_string(f)) + " " + std::string(atom) + " applied to a " +
                 std::string(to_string(g.curvature)) + " argument";
  }
  return out;
}

struct PowerRule {
  Curvature curvature = Curvature::Unknown;
  Mono mono = Mono::None;
};

PowerRule power_rule(double p, Interval u) {
  const bool integral = std::floor(p) == p;
  if (integral) {
    const bool even = std::fmod(p, 2.0) == 0.0;
    if (p > 1) {
      if (even) {
        if (u.nonneg()) return {Curvature::Convex, Mono::Nondecreasing};
        if (u.nonpos()) return {Curvature::Convex, Mono::Nonincreasing};
        return {Curvature::Convex, Mono::None};
      }
      if (u.nonneg()) return {Curvature::Convex, Mono::Nondecreasing};
      if (u.nonpos()) return {Curvature::Concave, Mono::Nondecreasing};
      return {};
    }
    // p <= -1: a pole at zero.
    if (u.positive()) return {Curvature::Convex, Mono::Nonincreasing};
    if (u.negative()) {
      return even ? PowerRule{Curvature::Convex, Mono::Nondecreasing}
                  : PowerRule{Curvature::Concave, Mono::Nonincreasing};
    }
    return {};
  }
  // Non-integer exponents: evaluation is restricted to u >= 0.
  if (p > 1) return {Curvature::Convex, Mono::Nondecreasing};
  if (p > 0) return {Curvature::Concave, Mono::Nondecreasing};
  return {Curvature::Convex, Mono::Nonincreasing};
}

Info analyze(const Expr& e, std::span<const Interval> box);

Info rules(const Expr& e, std::span<const Interval> box) {
  Info out;
  out.range = range_of(e, box);
  switch (e.op()) {
    case Op::Constant:
      out.curvature = Curvature::Constant;
      return out;
    case Op::Variable:
      out.curvature = Curvature::Affine;
      return out;
    case Op::Sum: {
      out.curvature = Curvature::Constant;
      std::string convex_term, concave_term;
      for (const Expr& t : e.args()) {
        const Info ti = analyze(t, box);
        out.sampled = out.sampled || ti.sampled;
        if (ti.curvature == Curvature::Unknown && out.reason.empty()) out.reason = ti.reason;
        if (ti.curvature == Curvature::Convex) convex_term = to_string(t);
        if (ti.curvature == Curvature::Concave) concave_term = to_string(t);
        out.curvature = add(out.curvature, ti.curvature);
      }
      if (out.curvature == Curvature::Unknown && out.reason.empty()) {
        out.reason = "sum of convex term '" + convex_term + "' and concave term '" + concave_term + "'";
      }
      return out;
    }
    case Op::Product: {
      Interval coefficient{1.0, 1.0};
      const Expr* varying = nullptr;
      Info varying_info;
      int n_varying = 0;
      for (const Expr& f : e.args()) {
        const Info fi = analyze(f, box);
        out.sampled = out.sampled || fi.sampled;
        if (fi.curvature == Curvature::Constant) {
          coefficient = coefficient * fi.range;
        } else {
          ++n_varying;
          varying = &f;
          varying_info = fi;
        }
      }
      if (n_varying == 0) {
        out.curvature = Curvature::Constant;
      } else if (n_varying == 1) {
        out.curvature = scale(varying_info.curvature, coefficient);
        if (out.curvature == Curvature::Unknown) {
          out.reason = varying_info.curvature == Curvature::Unknown
                           ? varying_info.reason
                           : "sign-indefinite scaling of '" + to_string(*varying) + "'";
        }
      } else {
        out.reason = "product of non-constant factors '" + to_string(e) + "'";
      }
      return out;
    }
    case Op::Divide: {
      const Info a = analyze(e.arg(0), box);
      const Info b = analyze(e.arg(1), box);
      out.sampled = a.sampled || b.sampled;
      if (b.curvature == Curvature::Constant) {
        out.curvature = scale(a.curvature, Interval{1.0, 1.0} / b.range);
        if (out.curvature == Curvature::Unknown) out.reason = a.reason;
        return out;
      }
      if (a.curvature == Curvature::Constant) {
        Info inv;
        if (b.range.positive()) {
          inv = compose("reciprocal", Curvature::Convex, Mono::Nonincreasing, b, out.range);
        } else if (b.range.negative()) {
          inv = compose("reciprocal", Curvature::Concave, Mono::Nonincreasing, b, out.range);
        } else {
          out.reason = "division by '" + to_string(e.arg(1)) + "', which may change sign";
          return out;
        }
        out.curvature = inv.curvature == Curvature::Unknown ? inv.curvature
                                                            : scale(inv.curvature, a.range);
        out.reason = inv.reason;
        return out;
      }
      out.reason = "ratio of non-constant expressions '" + to_string(e) + "'";
      return out;
    }
    case Op::Power:
    case Op::Square: {
      const double p = e.op() == Op::Square ? 2.0 : e.exponent();
      const Info u = analyze(e.arg(0), box);
      const PowerRule rule = power_rule(p, u.range);
      if (rule.curvature == Curvature::Unknown) {
        Info r = u;
        r.curvature = Curvature::Unknown;
        r.range = out.range;
        r.reason = u.curvature == Curvature::Unknown
                       ? u.reason + " inside power"
                       : "power " + format_number(p) + " over a range where it changes curvature";
        return r;
      }
      return compose("power", rule.curvature, rule.mono, u, out.range);
    }
    case Op::Exp:
      return compose("exp", Curvature::Convex, Mono::Nondecreasing, analyze(e.arg(0), box),
                     out.range);
    case Op::Log:
      return compose("log", Curvature::Concave, Mono::Nondecreasing, analyze(e.arg(0), box),
                     out.range);
    case Op::Sqrt:
      return compose("sqrt", Curvature::Concave, Mono::Nondecreasing, analyze(e.arg(0), box),
                     out.range);
    case Op::InvPos:
      return compose("inv_pos", Curvature::Convex, Mono::Nonincreasing, analyze(e.arg(0), box),
                     out.range);
    case Op::Abs: {
      const Info u = analyze(e.arg(0), box);
      const Mono mono = u.range.nonneg()   ? Mono::Nondecreasing
                        : u.range.nonpos() ? Mono::Nonincreasing
                                           : Mono::None;
      return compose("abs", Curvature::Convex, mono, u, out.range);
    }
    case Op::Min:
    case Op::Max: {
      const bool is_min = e.op() == Op::Min;
      out.curvature = Curvature::Constant;
      for (const Expr& a : e.args()) {
        const Info ai = analyze(a, box);
        out.sampled = out.sampled || ai.sampled;
        const bool ok = is_min ? is_concave(ai.curvature) : is_convex(ai.curvature);
        if (!ok) {
          out.curvature = Curvature::Unknown;
          out.reason = ai.curvature == Curvature::Unknown
                           ? ai.reason + " inside " + std::string(op_name(e.op()))
                           : std::string(op_name(e.op())) + " of a " +
                                 std::string(to_string(ai.curvature)) + " argument";
          return out;
        }
        if (ai.curvature != Curvature::Constant) {
          out.curvature = is_min ? Curvature::Concave : Curvature::Convex;
        }
      }
      return out;
    }
    case Op::Sign: {
      const Interval u = range_of(e.arg(0), box);
      if (u.positive() || u.negative()) {
        out.curvature = Curvature::Constant;
      } else {
        out.reason = "sign of '" + to_string(e.arg(0)) + "', which may change sign";
      }
      return out;
    }
  }
  return out;
}

/// Upgrades an unknown univariate label by sampling the second derivative.
void sample_second_derivative(const Expr& e, std::span<const Interval> box, Info& info) {
  const std::set<int> vars = variables_of(e);
  if (vars.size() != 1) return;
  const int v = *vars.begin();
  if (v < 0 || static_cast<std::size_t>(v) >= box.size() || !box[v].finite()) return;
  const Expr d2 = differentiate(differentiate(e, v), v);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(box.size());
  bool all_nonneg = true;
  bool all_nonpos = true;
  const double lo = box[v].lo;
  const double hi = box[v].hi;
  try {
    for (int i = 0; i < kCurvatureSamples; ++i) {
      x[v] = lo + (hi - lo) * i / (kCurvatureSamples - 1);
      const double h = evaluate(d2, x);
      if (!std::isfinite(h)) return;
      all_nonneg = all_nonneg && h >= 0.0;
      all_nonpos = all_nonpos && h <= 0.0;
    }
  } catch (const Error&) {
    return;
  }
  if (all_nonneg) {
    info.curvature = Curvature::Convex;
  } else if (all_nonpos) {
    info.curvature = Curvature::Concave;
  } else {
    return;
  }
  info.sampled = true;
  info.reason.clear();
}

Info analyze(const Expr& e, std::span<const Interval> box) {
  Info info = rules(e, box);
  if (info.curvature == Curvature::Unknown) sample_second_derivative(e, box, info);
  return info;
}

Sign sign_of(Interval r) {
  if (r.nonneg()) return Sign::Nonneg;
  if (r.nonpos()) return Sign::Nonpos;
  return Sign::Unknown;
}

void check_component(const Expr& e, Location loc, bool need_affine, std::span<const Interval> box,
                     ConvexityReport& report) {
  const CurvatureResult whole = curvature_of(e, box);
  const auto acceptable = [&](Curvature c) { return need_affine ? is_affine(c) : is_convex(c); };
  if (acceptable(whole.curvature)) {
    report.sampled = report.sampled || whole.sampled;
    return;
  }
  const auto reason_for = [&](const CurvatureResult& r) {
    if (r.curvature == Curvature::Unknown) return r.reason;
    if (need_affine) return "non-affine (" + std::string(to_string(r.curvature)) + ") equality";
    return std::string(to_string(r.curvature)) + " where convexity is required";
  };
  bool isolated = false;
  if (e.op() == Op::Sum) {
    for (const Expr& term : e.args()) {
      const CurvatureResult tr = curvature_of(term, box);
      if (!acceptable(tr.curvature)) {
        report.offenders.push_back({loc, term, reason_for(tr)});
        isolated = true;
      }
    }
  }
  if (!isolated) report.offenders.push_back({loc, e, reason_for(whole)});
}

}  // namespace

CurvatureResult curvature_of(const Expr& e, std::span<const Interval> box) {
  const Info info = analyze(e, box);
  return {info.curvature, sign_of(info.range), info.sampled, info.reason};
}

ConvexityReport analyze_problem(const StandardForm& p) {
  ConvexityReport report;
  const std::vector<Interval> box = variable_intervals(p.variables);
  check_component(p.objective, {ComponentKind::Objective, 0}, false, box, report);
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    check_component(p.inequalities[i].lhs, {ComponentKind::Inequality, i}, false, box, report);
  }
  for (std::size_t j = 0; j < p.equalities.size(); ++j) {
    check_component(p.equalities[j].lhs, {ComponentKind::Equality, j}, true, box, report);
  }
  for (std::size_t k = 0; k < p.variables.size(); ++k) {
    if (p.variables[k].type != VarType::Continuous) {
      report.offenders.push_back({{ComponentKind::VariableType, k},
                                  variable(static_cast<int>(k), p.variables[k].name),
                                  std::string(to_string(p.variables[k].type)) + " variable '" +
                                      p.variables[k].name + "'"});
    }
  }
  report.problem_convex = report.offenders.empty();
  return report;
}

}  // namespace optira
