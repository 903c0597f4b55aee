#include "optira/solver.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

#include "optira/differentiate.hpp"
#include "optira/error.hpp"

namespace optira {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIter: return "max-iter";
    case SolveStatus::InfeasibleSubproblem: return "infeasible-subproblem";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

SolveStatus parse_solve_status(std::string_view s) {
  for (SolveStatus v : {SolveStatus::Optimal, SolveStatus::MaxIter,
                        SolveStatus::InfeasibleSubproblem, SolveStatus::NumericalFailure}) {
    if (to_string(v) == s) return v;
  }
  throw SchemaError("unknown solve status '" + std::string(s) + "'");
}

double KktResiduals::max() const { return std::max({stationarity, primal, complementarity}); }

nlohmann::json to_json(const Solution& s) {
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json doc;
  doc["status"] = to_string(s.status);
  doc["x_star"] = vec(s.x_star);
  doc["objective"] = s.objective;
  doc["kkt"] = {{"stationarity", s.kkt.stationarity},
                {"primal", s.kkt.primal},
                {"complementarity", s.kkt.complementarity}};
  doc["iterations"] = s.iterations;
  if (s.outer_iterations > 0) {
    doc["outer_iterations"] = s.outer_iterations;
    doc["surrogate_trace"] = s.surrogate_trace;
    doc["objective_trace"] = s.objective_trace;
  }
  if (!s.message.empty()) doc["message"] = s.message;
  return doc;
}

void SolverOptions::validate() const {
  if (!(tolerance > 0) || max_inner <= 0 || max_outer <= 0 || !(sca_threshold > 0) ||
      !(damping > 0) || damping > 1 || proximal < 0) {
    throw InputError("solver options must be positive with damping in (0, 1]");
  }
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

struct Smooth {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
  std::function<MatrixXd(const VectorXd&)> hessian;
};

Smooth wrap(const Expr& e, int dim) {
  auto fn = std::make_shared<CompiledFunction>(e, dim);
  return {[fn](const VectorXd& z) { return fn->value(z); },
          [fn](const VectorXd& z) { return fn->gradient(z); },
          [fn](const VectorXd& z) { return fn->hessian(z); }};
}

// g(x) - s over the extended vector (x, s).
Smooth shifted(const Smooth& g, int dim) {
  return {[g, dim](const VectorXd& z) { return g.value(z.head(dim)) - z[dim]; },
          [g, dim](const VectorXd& z) {
            VectorXd out(dim + 1);
            out.head(dim) = g.gradient(z.head(dim));
            out[dim] = -1.0;
            return out;
          },
          [g, dim](const VectorXd& z) {
            MatrixXd out = MatrixXd::Zero(dim + 1, dim + 1);
            out.topLeftCorner(dim, dim) = g.hessian(z.head(dim));
            return out;
          }};
}

struct Work {
  int dim = 0;
  Smooth objective;
  std::vector<Smooth> ineq;
  std::vector<Smooth> eq;
  VectorXd lo, hi;
  std::vector<bool> fixed;

  int barrier_terms() const {
    int n = static_cast<int>(ineq.size());
    for (int k = 0; k < dim; ++k) {
      if (fixed[k]) continue;
      n += std::isfinite(lo[k]) + std::isfinite(hi[k]);
    }
    return n;
  }
};

struct Multipliers {
  double t = 1.0;
  VectorXd mu;
  double rho = 0.0;
};

std::optional<double> merit(const Work& w, const VectorXd& z, const Multipliers& m) {
  try {
    double phi = w.objective.value(z);
    for (std::size_t j = 0; j < w.eq.size(); ++j) {
      const double h = w.eq[j].value(z);
      phi += m.mu[j] * h + 0.5 * m.rho * h * h;
    }
    double val = m.t * phi;
    for (const Smooth& g : w.ineq) {
      const double v = g.value(z);
      if (!(v < 0)) return std::nullopt;
      val -= std::log(-v);
    }
    for (int k = 0; k < w.dim; ++k) {
      if (w.fixed[k]) continue;
      if (std::isfinite(w.lo[k])) {
        if (!(z[k] > w.lo[k])) return std::nullopt;
        val -= std::log(z[k] - w.lo[k]);
      }
      if (std::isfinite(w.hi[k])) {
        if (!(z[k] < w.hi[k])) return std::nullopt;
        val -= std::log(w.hi[k] - z[k]);
      }
    }
    if (!std::isfinite(val)) return std::nullopt;
    return val;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

struct Derivatives {
  VectorXd grad;     // of the merit function
  MatrixXd hess;
  VectorXd phi_grad; // of the objective alone
};

Derivatives derivatives(const Work& w, const VectorXd& z, const Multipliers& m) {
  Derivatives d;
  d.phi_grad = w.objective.gradient(z);
  VectorXd g = d.phi_grad;
  MatrixXd h = w.objective.hessian(z);
  for (std::size_t j = 0; j < w.eq.size(); ++j) {
    const double hv = w.eq[j].value(z);
    const VectorXd hg = w.eq[j].gradient(z);
    const double nu = m.mu[j] + m.rho * hv;
    g += nu * hg;
    h += nu * w.eq[j].hessian(z) + m.rho * hg * hg.transpose();
  }
  g *= m.t;
  h *= m.t;
  for (const Smooth& c : w.ineq) {
    const double v = c.value(z);
    const VectorXd cg = c.gradient(z);
    g += cg / -v;
    h += cg * cg.transpose() / (v * v) + c.hessian(z) / -v;
  }
  for (int k = 0; k < w.dim; ++k) {
    if (w.fixed[k]) continue;
    if (std::isfinite(w.lo[k])) {
      const double s = z[k] - w.lo[k];
      g[k] -= 1.0 / s;
      h(k, k) += 1.0 / (s * s);
    }
    if (std::isfinite(w.hi[k])) {
      const double s = w.hi[k] - z[k];
      g[k] += 1.0 / s;
      h(k, k) += 1.0 / (s * s);
    }
  }
  for (int k = 0; k < w.dim; ++k) {
    if (!w.fixed[k]) continue;
    g[k] = 0.0;
    h.row(k).setZero();
    h.col(k).setZero();
    h(k, k) = 1.0;
    d.phi_grad[k] = 0.0;
  }
  d.grad = std::move(g);
  d.hess = std::move(h);
  return d;
}

enum class Centering { Converged, Budget, Stopped, Failed };

struct Budget {
  int left = 0;
  int used = 0;
  std::optional<Clock::time_point> deadline;
};

void check_deadline(const Budget& b) {
  if (b.deadline && Clock::now() > *b.deadline) throw TimeoutError("solver deadline exceeded");
}

/// Damped Newton on the merit function for fixed multipliers.
Centering center(const Work& w, VectorXd& z, const Multipliers& m, Budget& budget,
                 const std::function<bool(const VectorXd&)>& stop) {
  double previous = kInf;
  for (;;) {
    check_deadline(budget);
    const std::optional<double> f0 = merit(w, z, m);
    if (!f0) return Centering::Failed;
    Derivatives d;
    try {
      d = derivatives(w, z, m);
    } catch (const DomainError&) {
      return Centering::Failed;
    }
    if (!d.grad.allFinite() || !d.hess.allFinite()) return Centering::Failed;

    VectorXd step;
    double shift = 0.0;
    const double scale = std::max(1.0, d.hess.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 12; ++attempt) {
      MatrixXd h = d.hess;
      if (shift > 0) h.diagonal().array() += shift;
      Eigen::LDLT<MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) {
        step = -ldlt.solve(d.grad);
        if (step.allFinite() && (ldlt.vectorD().array() > 0).all() && d.grad.dot(step) <= 0) break;
      }
      step.resize(0);
      shift = shift == 0.0 ? 1e-10 * scale : shift * 10.0;
    }
    if (step.size() == 0) step = -d.grad / scale;

    const double decrement = -d.grad.dot(step);
    if (decrement <= 1e-18) return Centering::Converged;
    // Close to the center roundoff in the merit hides the remaining decrease;
    // stop once the decrement no longer shrinks.
    if (decrement < 0.25 && decrement >= 0.5 * previous) return Centering::Converged;
    if (budget.left <= 0) return Centering::Budget;

    bool accepted = false;
    if (decrement < 0.25) {
      // quadratic region: full Newton step as long as it stays in the domain
      const VectorXd trial = z + step;
      if (merit(w, trial, m)) {
        z = trial;
        accepted = true;
      }
    }
    double alpha = 1.0;
    while (!accepted && alpha > 1e-14) {
      const VectorXd trial = z + alpha * step;
      const std::optional<double> ft = merit(w, trial, m);
      if (ft && *ft <= *f0 - 1e-4 * alpha * decrement) {
        z = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    --budget.left;
    ++budget.used;
    if (!accepted) return Centering::Converged;  // no further progress at working precision
    if (stop && stop(z)) return Centering::Stopped;
    previous = decrement;
  }
}

struct BarrierResult {
  Centering last = Centering::Converged;
  Multipliers m;
  bool optimal = false;
  KktResiduals kkt;
  VectorXd lambda;
};

KktResiduals residuals(const Work& w, const VectorXd& z, const Multipliers& m, VectorXd* lambda) {
  const Derivatives d = derivatives(w, z, m);
  KktResiduals r;
  r.stationarity = d.grad.lpNorm<Eigen::Infinity>() / m.t / (1.0 + d.phi_grad.lpNorm<Eigen::Infinity>());
  double primal = 0.0;
  if (lambda) lambda->resize(w.ineq.size());
  for (std::size_t i = 0; i < w.ineq.size(); ++i) {
    const double v = w.ineq[i].value(z);
    primal = std::max(primal, v);
    if (lambda) (*lambda)[i] = 1.0 / (m.t * -v);
  }
  for (const Smooth& h : w.eq) primal = std::max(primal, std::abs(h.value(z)));
  r.primal = primal;
  r.complementarity = w.barrier_terms() > 0 ? 1.0 / m.t : 0.0;
  return r;
}

BarrierResult barrier_method(const Work& w, VectorXd& z, double tol, Budget& budget,
                             const std::function<bool(const VectorXd&)>& stop) {
  BarrierResult out;
  Multipliers& m = out.m;
  m.mu = VectorXd::Zero(w.eq.size());
  m.rho = w.eq.empty() ? 0.0 : 10.0;
  const bool barrier = w.barrier_terms() > 0;
  int rho_steps = 0;
  for (int outer = 0; outer < 80; ++outer) {
    out.last = center(w, z, m, budget, stop);
    if (out.last != Centering::Converged) return out;
    VectorXd h(w.eq.size());
    for (std::size_t j = 0; j < w.eq.size(); ++j) h[j] = w.eq[j].value(z);
    // Stationarity uses the multipliers implied by this centering.
    m.mu += m.rho * h;
    const double mu_rho = m.rho;
    m.rho = 0.0;
    out.kkt = residuals(w, z, m, &out.lambda);
    m.rho = mu_rho;
    if (out.kkt.max() <= tol) {
      out.optimal = true;
      return out;
    }
    if (barrier && out.kkt.complementarity > tol * 0.1) m.t *= 10.0;
    if (h.size() > 0 && h.lpNorm<Eigen::Infinity>() > tol && rho_steps < 5) {
      m.rho *= 10.0;
      ++rho_steps;
    }
  }
  return out;
}

Work build_work(const StandardForm& p) {
  const int d = static_cast<int>(p.dimension());
  Work w;
  w.dim = d;
  w.objective = wrap(p.objective, d);
  for (const Constraint& c : p.inequalities) w.ineq.push_back(wrap(c.lhs, d));
  for (const Constraint& c : p.equalities) w.eq.push_back(wrap(c.lhs, d));
  w.lo = lower_bounds(p);
  w.hi = upper_bounds(p);
  w.fixed.resize(d);
  for (int k = 0; k < d; ++k) w.fixed[k] = w.lo[k] == w.hi[k];
  return w;
}

VectorXd push_inside(const Work& w, VectorXd z) {
  for (int k = 0; k < w.dim; ++k) {
    const double lo = w.lo[k], hi = w.hi[k];
    if (w.fixed[k]) {
      z[k] = lo;
      continue;
    }
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double margin = 1e-3 * (hi - lo);
      z[k] = std::clamp(z[k], lo + margin, hi - margin);
    } else if (std::isfinite(lo)) {
      z[k] = std::max(z[k], lo + 1e-3 * std::max(1.0, std::abs(lo)));
    } else if (std::isfinite(hi)) {
      z[k] = std::min(z[k], hi - 1e-3 * std::max(1.0, std::abs(hi)));
    }
  }
  return z;
}

std::optional<double> max_violation(const Work& w, const VectorXd& z) {
  double worst = -kInf;
  try {
    for (const Smooth& g : w.ineq) {
      const double v = g.value(z);
      if (std::isnan(v)) return std::nullopt;
      worst = std::max(worst, v);
    }
  } catch (const DomainError&) {
    return std::nullopt;
  }
  return worst;
}

Solution failure(SolveStatus status, const VectorXd& x, std::string message, int iterations) {
  Solution s;
  s.status = status;
  s.x_star = x;
  s.objective = std::numeric_limits<double>::quiet_NaN();
  s.kkt = {kInf, kInf, kInf};
  s.iterations = iterations;
  s.message = std::move(message);
  return s;
}

/// Finds a point with every inequality strictly negative by minimizing s
/// subject to g_i(x) <= s, s >= -1. Returns false when none exists.
bool phase_one(const Work& w, VectorXd& z, double tol, Budget& budget) {
  const std::optional<double> v0 = max_violation(w, z);
  if (!v0) return false;
  if (*v0 < 0) return true;
  Work aux;
  aux.dim = w.dim + 1;
  aux.objective = {[d = w.dim](const VectorXd& y) { return y[d]; },
                   [d = w.dim](const VectorXd&) {
                     VectorXd g = VectorXd::Zero(d + 1);
                     g[d] = 1.0;
                     return g;
                   },
                   [d = w.dim](const VectorXd&) { return MatrixXd::Zero(d + 1, d + 1); }};
  for (const Smooth& g : w.ineq) aux.ineq.push_back(shifted(g, w.dim));
  aux.lo.resize(aux.dim);
  aux.hi.resize(aux.dim);
  aux.lo << w.lo, -1.0;
  aux.hi << w.hi, kInf;
  aux.fixed = w.fixed;
  aux.fixed.push_back(false);

  VectorXd y(aux.dim);
  y << z, *v0 + 1.0;
  auto strictly = [&](const VectorXd& cand) {
    const std::optional<double> v = max_violation(w, cand.head(w.dim));
    return v && *v < 0;
  };
  const BarrierResult r = barrier_method(aux, y, tol, budget, strictly);
  if (strictly(y)) {
    z = y.head(w.dim);
    return true;
  }
  (void)r;
  return false;
}

}  // namespace

Solution solve_convex(const StandardForm& p, const Eigen::VectorXd& x0, const SolverOptions& opts) {
  opts.validate();
  const ConvexityReport report = analyze_problem(p);
  if (!report.problem_convex) {
    std::ostringstream msg;
    msg << "model is not convex";
    for (const Offender& o : report.offenders) msg << "; " << describe(o.location) << ": " << o.reason;
    throw SolverRejection(msg.str());
  }
  const Work w = build_work(p);
  VectorXd start = x0.size() == w.dim ? project_to_box(p, x0) : box_center(p);
  VectorXd z = push_inside(w, start);

  Budget budget{opts.max_inner, 0, opts.deadline};
  if (!w.ineq.empty() && !phase_one(w, z, opts.tolerance, budget)) {
    if (budget.left <= 0) {
      return failure(SolveStatus::MaxIter, z, "iteration budget spent finding an interior point",
                     budget.used);
    }
    return failure(SolveStatus::InfeasibleSubproblem, z,
                   "no strictly feasible point for the inequality constraints", budget.used);
  }
  if (!merit(w, z, Multipliers{1.0, VectorXd::Zero(w.eq.size()), 0.0})) {
    return failure(SolveStatus::NumericalFailure, z, "objective undefined at the starting point",
                   budget.used);
  }

  const BarrierResult r = barrier_method(w, z, opts.tolerance, budget, {});
  if (r.last == Centering::Failed) {
    return failure(SolveStatus::NumericalFailure, z, "non-finite merit or derivatives", budget.used);
  }
  Solution s;
  s.x_star = z;
  try {
    s.objective = evaluate(p.objective, z);
  } catch (const DomainError& e) {
    return failure(SolveStatus::NumericalFailure, z, e.what(), budget.used);
  }
  if (!std::isfinite(s.objective)) {
    return failure(SolveStatus::NumericalFailure, z, "objective is not finite", budget.used);
  }
  s.kkt = r.kkt;
  s.iterations = budget.used;
  s.inequality_multipliers = r.lambda;
  s.equality_multipliers = r.m.mu;
  if (r.optimal) {
    s.status = SolveStatus::Optimal;
  } else {
    s.status = SolveStatus::MaxIter;
    s.message = "tolerance not reached within the iteration budget";
  }
  return s;
}

Solution sca_loop(const StandardForm& original, const ConvexityReport& report,
                  const Strategy& strategy, const Eigen::VectorXd& x0, const SolverOptions& opts) {
  opts.validate();
  const bool nothing_to_do =
      report.offenders.empty() &&
      !(strategy.uses(StrategyKind::ContinuousRelaxation) && original.has_integer_variables());
  if (nothing_to_do) return solve_convex(original, x0, opts);

  VectorXd x = x0.size() == static_cast<Eigen::Index>(original.dimension())
                   ? project_to_box(original, x0)
                   : box_center(original);
  // A start given by the strategy's policy only matters for the first anchor.
  x = resolve_anchor(strategy, original, x);

  auto original_objective = [&](const VectorXd& at) {
    try {
      return evaluate(original.objective, at);
    } catch (const DomainError&) {
      return kInf;
    }
  };

  double f_prev = original_objective(x);
  int increases = 0;
  int inner = 0;
  Solution last;
  std::vector<double> surrogate_trace, objective_trace;
  for (int m = 1; m <= opts.max_outer; ++m) {
    Strategy at = strategy;
    at.anchor = x;
    const ConvexifiedProblem cp = convexify(original, report, at, x);
    StandardForm sub = cp.surrogate;
    const bool single = cp.linearized == 0;
    if (!single && opts.proximal > 0) {
      std::vector<Expr> prox;
      for (std::size_t k = 0; k < sub.dimension(); ++k) {
        prox.push_back(call(Op::Square, {sum({variable(static_cast<int>(k), sub.variables[k].name),
                                              constant(-x[k])})}));
      }
      sub.objective = sum({sub.objective, product({constant(0.5 * opts.proximal), sum(prox)})});
    }
    last = solve_convex(sub, x, opts);
    inner += last.iterations;
    if (last.status == SolveStatus::InfeasibleSubproblem ||
        last.status == SolveStatus::NumericalFailure) {
      last.iterations = inner;
      last.outer_iterations = m;
      last.surrogate_trace = surrogate_trace;
      last.objective_trace = objective_trace;
      return last;
    }
    const VectorXd next = x + opts.damping * (last.x_star - x);
    const double f_next = original_objective(next);
    surrogate_trace.push_back(last.objective);
    objective_trace.push_back(f_next);
    last.outer_iterations = m;
    if (single) {
      x = next;
      break;
    }
    if (f_next > f_prev + 1e-12) {
      if (++increases >= 3) {
        last.x_star = next;
        last.objective = f_next;
        last.status = SolveStatus::NumericalFailure;
        last.message = "original objective increased on 3 consecutive SCA steps";
        last.iterations = inner;
        last.surrogate_trace = surrogate_trace;
        last.objective_trace = objective_trace;
        return last;
      }
    } else {
      increases = 0;
    }
    const bool settled = std::abs(f_next - f_prev) <= opts.sca_threshold;
    x = next;
    f_prev = f_next;
    if (settled) break;
    if (m == opts.max_outer) {
      last.status = SolveStatus::MaxIter;
      last.message = "SCA outer iteration cap reached";
    }
  }
  last.x_star = x;
  last.objective = original_objective(x);
  if (!std::isfinite(last.objective)) {
    last.status = SolveStatus::NumericalFailure;
    last.message = "original objective undefined at the SCA iterate";
  }
  last.iterations = inner;
  last.surrogate_trace = std::move(surrogate_trace);
  last.objective_trace = std::move(objective_trace);
  return last;
}

}  // namespace optira
