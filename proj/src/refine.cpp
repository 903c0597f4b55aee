#include "optira/refine.hpp"

#include <cmath>
#include <stdexcept>

#include "optira/prompts.hpp"

namespace optira {

nlohmann::json to_json(const FeasibilityResult& f) {
  nlohmann::json rows = nlohmann::json::array();
  for (const Residual& r : f.residuals) {
    rows.push_back({{"id", r.id}, {"residual", r.value}, {"pass", r.pass}});
  }
  nlohmann::json doc{{"V", f.V}, {"epsilon", f.epsilon}, {"residuals", rows}};
  if (!f.reason.empty()) doc["reason"] = f.reason;
  return doc;
}

FeasibilityResult validate_feasibility(const StandardForm& original, const Eigen::VectorXd& x,
                                       double epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("feasibility tolerance must be positive");
  if (x.size() != static_cast<Eigen::Index>(original.dimension())) {
    throw std::invalid_argument("point dimension does not match the model");
  }
  FeasibilityResult out;
  out.epsilon = epsilon;
  bool ok = true;
  auto add = [&](std::string id, double value, bool pass) {
    out.residuals.push_back({std::move(id), value, pass});
    ok = ok && pass;
  };
  auto eval = [&](const Expr& e, const std::string& id, double& value) {
    try {
      value = evaluate(e, x);
      if (std::isfinite(value)) return true;
      out.reason = id + " is not finite at x*";
    } catch (const DomainError& err) {
      out.reason = id + ": " + err.what();
    }
    add(id, std::numeric_limits<double>::quiet_NaN(), false);
    return false;
  };
  for (std::size_t i = 0; i < original.m(); ++i) {
    const std::string id = "g" + std::to_string(i);
    double v = 0.0;
    if (eval(original.inequalities[i].lhs, id, v)) add(id, v, v <= epsilon);
  }
  for (std::size_t j = 0; j < original.n(); ++j) {
    const std::string id = "h" + std::to_string(j);
    double v = 0.0;
    if (eval(original.equalities[j].lhs, id, v)) add(id, std::abs(v), std::abs(v) <= epsilon);
  }
  for (std::size_t k = 0; k < original.dimension(); ++k) {
    const Variable& var = original.variables[k];
    const double xi = x[static_cast<Eigen::Index>(k)];
    const double outside = std::max({var.lower - xi, xi - var.upper, 0.0});
    add("bound:" + var.name, outside, std::isfinite(xi) && outside <= epsilon);
    if (var.type != VarType::Continuous) {
      const double frac = std::abs(xi - std::round(xi));
      add("integer:" + var.name, frac, frac <= kIntegralityTolerance);
    }
  }
  out.V = ok ? 1 : 0;
  return out;
}

// ---- ECL -----------------------------------------------------------------

nlohmann::json to_json(const EclState& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const EclEntry& e : s.history) {
    hist.push_back({{"k", e.k},
                    {"error", to_json(e.report)},
                    {"repair", e.repair},
                    {"code", to_json(e.code)},
                    {"Q", e.Q}});
  }
  return {{"k", s.k}, {"K", s.K}, {"history", hist}};
}

namespace {

std::string reinsert_model(const std::string& script, const std::string& document) {
  std::string out;
  std::size_t pos = 0;
  bool inserted = false;
  while (pos < script.size()) {
    auto end = script.find('\n', pos);
    if (end == std::string::npos) end = script.size();
    const std::string line = script.substr(pos, end - pos);
    const auto first = line.find_first_not_of(" \t");
    if (!inserted && first != std::string::npos && line.compare(first, 5, "solve") == 0) {
      out += "model " + document + "\n";
      inserted = true;
    }
    out += line + "\n";
    pos = end + 1;
  }
  if (!inserted) out += "model " + document + "\nsolve\n";
  return out;
}

}  // namespace

EclResult run_ecl(const ExecutionOutcome& outcome, const GeneratedCode& code,
                  Conversation* conversation, int K, const ExecutionContext& ctx) {
  if (outcome.Q != 0 || !outcome.error) {
    throw std::invalid_argument("run_ecl requires a failed execution (Q = 0)");
  }
  if (K < 1) throw std::invalid_argument("ECL cap must be at least 1");
  EclResult res{outcome, code, {}};
  res.state.K = K;
  while (res.outcome.Q == 0 && res.state.k < K) {
    const ErrorReport report = *res.outcome.error;
    EclEntry entry;
    entry.k = res.state.k + 1;
    entry.report = report;
    GeneratedCode next = res.code;
    bool runnable = true;
    if (report.error_class == ErrorClass::Schema) {
      next.script = template_script(next.target, next.model_document, ctx.solver);
      next.provenance = Provenance::Template;
      entry.repair = "regenerated from template";
    } else if (report.error_class == ErrorClass::MissingSymbol &&
               report.message.find("without a model") != std::string::npos &&
               next.target == Target::Internal) {
      next.script = reinsert_model(next.script, next.model_document);
      entry.repair = "re-emitted model document";
    } else if (conversation == nullptr) {
      next.script = template_script(next.target, next.model_document, ctx.solver);
      next.provenance = Provenance::Template;
      entry.repair = "regenerated from template (no backend)";
    } else {
      const std::string prompt = render_prompt(Stage::RepairCode, conversation->problem_id(),
                                               {{"error_class", std::string(to_string(report.error_class))},
                                                {"error", report.message},
                                                {"excerpt", report.excerpt},
                                                {"script", res.code.script},
                                                {"model", res.code.model_document}});
      entry.repair = "backend repair";
      try {
        next = code_from_reply(conversation->ask(Stage::RepairCode, prompt), res.code.target,
                               res.code.model_document);
      } catch (const ScriptError& e) {
        next.script = fenced_block(conversation->exchanges().back().response)
                          .value_or(conversation->exchanges().back().response);
        next.provenance = Provenance::Llm;
        res.outcome = ExecutionOutcome{0, std::nullopt, ErrorReport{e.error_class(), e.what(), e.excerpt()}, 0.0};
        runnable = false;
      } catch (const BackendError& e) {
        res.outcome = ExecutionOutcome{0, std::nullopt,
                                       ErrorReport{report.error_class, report.message, report.excerpt}, 0.0};
        entry.repair = std::string("backend repair failed: ") + e.what();
        runnable = false;
      }
    }
    if (runnable) res.outcome = execute(next, ctx);
    res.code = next;
    entry.code = next;
    entry.Q = res.outcome.Q;
    res.state.history.push_back(std::move(entry));
    ++res.state.k;
  }
  return res;
}

// ---- FDC -----------------------------------------------------------------

std::string_view to_string(FdcStage s) { return s == FdcStage::Adjust ? "adjust" : "reanalyze"; }

FdcStage fdc_stage(int l, int L) {
  if (L < 1 || l < 1 || l > L) throw std::invalid_argument("FDC iteration out of range");
  return l <= L / 2 ? FdcStage::Adjust : FdcStage::Reanalyze;
}

nlohmann::json to_json(const FdcState& s) {
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json hist = nlohmann::json::array();
  for (const FdcEntry& e : s.history) {
    hist.push_back({{"l", e.l},
                    {"stage", to_string(e.stage)},
                    {"strategy", e.strategy},
                    {"x0", vec(e.x0)},
                    {"V", e.V},
                    {"note", e.note}});
  }
  return {{"l", s.l},
          {"L", s.L},
          {"stage", to_string(s.stage)},
          {"gamma", s.gamma},
          {"delta_x", vec(s.delta_x)},
          {"history", hist}};
}

Eigen::VectorXd default_delta(const StandardForm& original, const Eigen::VectorXd& x_star) {
  const Eigen::VectorXd center = box_center(original);
  Eigen::VectorXd d = center - x_star;
  for (std::size_t k = 0; k < original.dimension(); ++k) {
    const Variable& v = original.variables[k];
    if (!std::isfinite(v.lower) || !std::isfinite(v.upper)) d[static_cast<Eigen::Index>(k)] = 0.0;
  }
  return d;
}

FdcResult run_fdc(const StandardForm& original, const ConvexityReport& report,
                  const Solution& first_solution, int L, double gamma,
                  const std::optional<Eigen::VectorXd>& delta_x, FdcResolver& resolver,
                  double epsilon) {
  if (L < 1) throw std::invalid_argument("FDC cap must be at least 1");
  if (!(gamma > 0)) throw std::invalid_argument("FDC step size must be positive");
  FdcResult res;
  res.feasibility = validate_feasibility(original, first_solution.x_star, epsilon);
  if (res.feasibility.V == 1) throw std::invalid_argument("run_fdc requires an infeasible solution");

  FdcState& st = res.state;
  st.L = L;
  st.gamma = gamma;
  st.delta_x = delta_x ? *delta_x : default_delta(original, first_solution.x_star);
  st.x0 = first_solution.x_star;
  for (int l = 1; l <= L; ++l) {
    st.l = l;
    st.stage = fdc_stage(l, L);
    FdcEntry entry;
    entry.l = l;
    entry.stage = st.stage;
    std::optional<Solution> sol;
    if (st.stage == FdcStage::Adjust) {
      st.x0 = project_to_box(original, st.x0 + gamma * st.delta_x);
      entry.strategy = "resolve";
      sol = resolver.adjust(st.x0, entry.note);
    } else {
      const Strategy s = select_strategy(report, l - L / 2 - 1);
      entry.strategy = s.label();
      sol = resolver.reanalyze(s, st.x0, entry.note);
    }
    entry.x0 = st.x0;
    if (sol) {
      res.feasibility = validate_feasibility(original, sol->x_star, epsilon);
      entry.V = res.feasibility.V;
      if (entry.note.empty() && res.feasibility.V == 0) entry.note = "still infeasible";
    }
    st.history.push_back(std::move(entry));
    if (sol && res.feasibility.V == 1) {
      res.solution = std::move(sol);
      return res;
    }
  }
  return res;
}

}  // namespace optira
