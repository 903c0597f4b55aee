#include "optira/pipeline.hpp"

#include <chrono>

#include "optira/convexify.hpp"
#include "optira/curvature.hpp"
#include "optira/error.hpp"
#include "optira/extraction.hpp"
#include "optira/model_json.hpp"
#include "optira/parse.hpp"
#include "optira/prompts.hpp"

namespace optira {

using nlohmann::json;

std::string AblationConfig::label() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += name;
  };
  add(o_convex, "o-convex");
  add(o_ecl, "o-ecl");
  add(o_fdc, "o-fdc");
  return out.empty() ? "full" : out;
}

AblationConfig parse_ablation(std::string_view text) {
  AblationConfig a;
  if (text.empty() || text == "full") return a;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find_first_of("+,", pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(pos, end - pos);
    if (item == "o-convex") {
      a.o_convex = true;
    } else if (item == "o-ecl") {
      a.o_ecl = true;
    } else if (item == "o-fdc") {
      a.o_fdc = true;
    } else {
      throw InputError("unknown ablation '" + std::string(item) + "' (expected o-convex, o-ecl, o-fdc)");
    }
    pos = end + 1;
  }
  return a;
}

void PipelineConfig::validate() const {
  if (K < 1 || K > 20) throw InputError("K must be in 1..20");
  if (L < 1 || L > 20) throw InputError("L must be in 1..20");
  if (!(epsilon > 0)) throw InputError("epsilon must be positive");
  if (!(gamma > 0)) throw InputError("gamma must be positive");
  if (!(execution.limits.wall_seconds > 0) || execution.limits.memory_bytes == 0) {
    throw InputError("execution limits must be positive");
  }
  execution.solver.validate();
}

namespace {
constexpr std::pair<RunOutcome, std::string_view> kOutcomeNames[] = {
    {RunOutcome::Success, "success"},
    {RunOutcome::Infeasible, "infeasible"},
    {RunOutcome::ExecutionFailed, "execution-failed"},
    {RunOutcome::Inconsistent, "inconsistent"},
    {RunOutcome::InputFailure, "input-failure"},
    {RunOutcome::BackendFailure, "backend-failure"},
    {RunOutcome::ModelFailure, "model-failure"},
    {RunOutcome::InternalError, "internal-error"},
};
}  // namespace

std::string_view to_string(RunOutcome o) {
  for (const auto& [k, name] : kOutcomeNames) {
    if (k == o) return name;
  }
  return "internal-error";
}

RunOutcome parse_run_outcome(std::string_view s) {
  for (const auto& [k, name] : kOutcomeNames) {
    if (name == s) return k;
  }
  throw SchemaError("unknown run outcome '" + std::string(s) + "'");
}

json to_json(const ConvexityReport& r) {
  json offenders = json::array();
  for (const Offender& o : r.offenders) {
    offenders.push_back({{"location", describe(o.location)},
                         {"expression", to_string(o.expression)},
                         {"reason", o.reason}});
  }
  return {{"convex", r.problem_convex}, {"sampled", r.sampled}, {"offenders", offenders}};
}

std::uint64_t trial_seed(std::string_view problem_id, int trial) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  mix(problem_id);
  mix("#");
  mix(std::to_string(trial));
  return h;
}

json to_json(const RunRecord& r, bool with_timings) {
  json doc;
  doc["schema"] = kRunRecordSchema;
  doc["problem_id"] = r.problem_id;
  doc["trial"] = r.trial;
  doc["seed"] = r.seed;
  doc["ablation"] = r.ablation;
  doc["outcome"] = to_string(r.outcome);
  doc["Q"] = r.Q;
  doc["V"] = r.V;
  doc["T"] = r.T;
  doc["ecl_iterations"] = r.ecl_iterations;
  doc["fdc_iterations"] = r.fdc_iterations;
  doc["objective"] = r.objective ? json(*r.objective) : json(nullptr);
  doc["x_star"] = r.x_star ? json(std::vector<double>(r.x_star->data(), r.x_star->data() + r.x_star->size()))
                           : json(nullptr);
  doc["message"] = r.message;
  if (with_timings) {
    json t = json::array();
    for (const StageTiming& s : r.timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    doc["timings"] = t;
  }
  json ex = json::array();
  for (const Exchange& e : r.exchanges) ex.push_back(to_json(e));
  doc["exchanges"] = ex;
  doc["trace"] = r.trace;
  return doc;
}

RunRecord record_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("schema", "") != kRunRecordSchema) {
    throw SchemaError(std::string("run record must declare schema ") + std::string(kRunRecordSchema));
  }
  RunRecord r;
  try {
    r.problem_id = doc.at("problem_id").get<std::string>();
    r.trial = doc.at("trial").get<int>();
    r.seed = doc.value("seed", std::uint64_t{0});
    r.ablation = doc.at("ablation").get<std::string>();
    r.outcome = parse_run_outcome(doc.at("outcome").get<std::string>());
    r.Q = doc.at("Q").get<int>();
    r.V = doc.at("V").get<int>();
    r.T = doc.at("T").get<int>();
    r.ecl_iterations = doc.value("ecl_iterations", 0);
    r.fdc_iterations = doc.value("fdc_iterations", 0);
    if (doc.contains("objective") && doc["objective"].is_number()) r.objective = doc["objective"].get<double>();
    if (doc.contains("x_star") && doc["x_star"].is_array()) {
      const auto v = doc["x_star"].get<std::vector<double>>();
      r.x_star = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    r.message = doc.value("message", std::string());
    for (const json& t : doc.value("timings", json::array())) {
      r.timings.push_back({t.at("stage").get<std::string>(), t.at("seconds").get<double>()});
    }
    for (const json& e : doc.value("exchanges", json::array())) {
      Exchange x;
      x.stage = parse_stage(e.at("stage").get<std::string>());
      x.prompt = e.value("prompt", std::string());
      x.response = e.value("response", std::string());
      x.error = e.value("error", std::string());
      r.exchanges.push_back(std::move(x));
    }
    r.trace = doc.value("trace", json::object());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed run record: ") + e.what());
  }
  if ((r.Q != 0 && r.Q != 1) || (r.V != 0 && r.V != 1) || (r.T != 0 && r.T != 1)) {
    throw SchemaError("run record flags must be 0 or 1");
  }
  if (r.V == 1 && r.Q == 0) throw SchemaError("run record has V = 1 without Q = 1");
  return r;
}

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<StageTiming>& out) : out_(out) {}
  template <typename F>
  auto operator()(const char* stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      std::vector<StageTiming>& out;
      const char* stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        out.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
      }
    } rec{out_, stage, t0};
    return f();
  }

 private:
  std::vector<StageTiming>& out_;
};

json outcome_json(const ExecutionOutcome& o, bool verbose) {
  json doc = to_json(o);
  if (!verbose && doc.contains("solution")) {
    doc["solution"].erase("surrogate_trace");
    doc["solution"].erase("objective_trace");
  }
  return doc;
}

StartPoint start_lines(const StandardForm& p, const Eigen::VectorXd& x) {
  StartPoint s;
  for (std::size_t k = 0; k < p.dimension(); ++k) s.emplace_back(p.variables[k].name, x[static_cast<Eigen::Index>(k)]);
  return s;
}

std::string describe_error(const ErrorReport& r) { return std::string(to_string(r.error_class)) + ": " + r.message; }

// FDC re-solves always go through the deterministic template with start lines.
class TemplateResolver : public FdcResolver {
 public:
  TemplateResolver(const StandardForm& model, const ConvexityReport& report, const PipelineConfig& cfg,
                   std::string document)
      : model_(model), report_(report), cfg_(cfg), document_(std::move(document)) {}

  std::optional<Solution> adjust(const Eigen::VectorXd& x0, std::string& note) override {
    return run(document_, x0, note);
  }

  std::optional<Solution> reanalyze(const Strategy& strategy, const Eigen::VectorXd& x0,
                                    std::string& note) override {
    ConvexifiedProblem cp;
    if (report_.problem_convex || cfg_.ablation.o_convex) {
      cp = identity_convexification(model_);
    } else {
      try {
        cp = convexify(model_, report_, strategy, x0);
      } catch (const Error& e) {
        note = std::string("convexification failed: ") + e.what();
        return std::nullopt;
      }
    }
    return run(canonical_text(model_document(cp, model_)), x0, note);
  }

 private:
  std::optional<Solution> run(const std::string& document, const Eigen::VectorXd& x0, std::string& note) {
    GeneratedCode code{template_script(cfg_.target, document, cfg_.execution.solver, start_lines(model_, x0)),
                       cfg_.target, document, Provenance::Template};
    ExecutionOutcome o = execute(code, cfg_.execution);
    if (o.Q == 1) return o.solution;
    note = describe_error(*o.error);
    return std::nullopt;
  }

  const StandardForm& model_;
  const ConvexityReport& report_;
  const PipelineConfig& cfg_;
  std::string document_;
};

void finish(RunRecord& r, RunOutcome outcome, std::string message) {
  r.outcome = outcome;
  r.message = std::move(message);
}

}  // namespace

RunRecord run_pipeline(const PipelineInput& input, LlmBackend* backend, const PipelineConfig& config,
                       int trial) {
  RunRecord rec;
  rec.problem_id = input.id;
  rec.trial = trial;
  rec.seed = trial_seed(input.id, trial);
  rec.ablation = config.ablation.label();
  Stopwatch timed(rec.timings);

  std::optional<Conversation> conv;
  if (backend != nullptr) conv.emplace(*backend, input.id);
  Conversation* cv = conv ? &*conv : nullptr;
  auto keep_exchanges = [&] {
    if (conv) rec.exchanges = conv->exchanges();
  };

  try {
    // ---- model construction and consistency
    StandardForm model;
    if (cv != nullptr) {
      ConstructedModel built;
      try {
        built = timed("construct", [&] { return construct_model(input.text, *cv); });
      } catch (const InputError& e) {
        finish(rec, RunOutcome::InputFailure, e.what());
      } catch (const BackendError& e) {
        finish(rec, RunOutcome::BackendFailure, e.what());
      } catch (const SchemaError& e) {
        finish(rec, RunOutcome::BackendFailure, e.what());
      } catch (const Error& e) {
        finish(rec, RunOutcome::ModelFailure, e.what());
      }
      if (!rec.message.empty()) {
        keep_exchanges();
        return rec;
      }
      model = built.model;
      rec.T = built.consistency.T;
      rec.trace["sets"] = to_json(built.sets);
      rec.trace["consistency"] = to_json(built.consistency);
      rec.trace["rebuilds"] = built.rebuilds;
    } else if (input.reference_model) {
      model = *input.reference_model;
      rec.T = 1;
      rec.trace["consistency"] = "reference model";
    } else {
      finish(rec, RunOutcome::InputFailure, "no backend configured and no reference model");
      return rec;
    }
    rec.trace["model"] = to_json(model);
    if (rec.T == 0) {
      finish(rec, RunOutcome::Inconsistent, "theoretical consistency failed after the rebuilds");
      keep_exchanges();
      return rec;
    }

    // ---- curvature and convexification
    const ConvexityReport report = timed("analyze", [&] { return analyze_problem(model); });
    rec.trace["convexity"] = to_json(report);
    ConvexifiedProblem cp = timed("convexify", [&] {
      json attempts = json::array();
      std::optional<ConvexifiedProblem> out;
      if (!report.problem_convex && !config.ablation.o_convex) {
        for (int attempt = 0; attempt < 3 && !out; ++attempt) {
          const Strategy s = select_strategy(report, attempt);
          try {
            out = convexify(model, report, s, box_center(model));
            attempts.push_back({{"strategy", s.label()}, {"result", "ok"}});
          } catch (const Error& e) {
            attempts.push_back({{"strategy", s.label()}, {"result", e.what()}});
          }
        }
      }
      if (!out) out = identity_convexification(model);
      json info{{"strategy", report.problem_convex || config.ablation.o_convex ? json("none")
                                                                               : json(to_json(out->strategy))},
                {"linearized", out->linearized},
                {"attempts", attempts}};
      if (!report.problem_convex && config.ablation.o_convex) info["skipped"] = "o-convex";
      rec.trace["convexification"] = info;
      return *out;
    });

    // ---- code generation and execution
    const std::string document = canonical_text(model_document(cp, model));
    GeneratedCode code;
    std::optional<ExecutionOutcome> outcome;
    try {
      code = timed("codegen", [&] { return generate_script(cp, model, config.target, cv, config.execution.solver); });
    } catch (const ScriptError& e) {
      code = GeneratedCode{cv && !cv->exchanges().empty()
                               ? fenced_block(cv->exchanges().back().response).value_or(cv->exchanges().back().response)
                               : std::string(),
                           config.target, document, Provenance::Llm};
      outcome = ExecutionOutcome{0, std::nullopt, ErrorReport{e.error_class(), e.what(), e.excerpt()}, 0.0};
    } catch (const BackendError& e) {
      finish(rec, RunOutcome::BackendFailure, e.what());
      keep_exchanges();
      return rec;
    }
    rec.trace["code"] = to_json(code);
    if (!outcome) outcome = timed("execute", [&] { return execute(code, config.execution); });
    rec.timings.push_back({"execute.wall", outcome->wall_seconds});
    rec.trace["execution"] = outcome_json(*outcome, config.verbose);

    if (outcome->Q == 0 && !config.ablation.o_ecl) {
      EclResult ecl = timed("ecl", [&] { return run_ecl(*outcome, code, cv, config.K, config.execution); });
      rec.ecl_iterations = ecl.state.k;
      rec.trace["ecl"] = to_json(ecl.state);
      outcome = ecl.outcome;
      code = ecl.code;
      rec.trace["final_execution"] = outcome_json(*outcome, config.verbose);
    }
    rec.Q = outcome->Q;
    if (rec.Q == 0) {
      finish(rec, RunOutcome::ExecutionFailed, describe_error(*outcome->error));
      keep_exchanges();
      return rec;
    }

    // ---- feasibility and FDC
    Solution solution = *outcome->solution;
    FeasibilityResult feas = timed("validate", [&] { return validate_feasibility(model, solution.x_star, config.epsilon); });
    rec.trace["feasibility"] = to_json(feas);
    if (feas.V == 0 && !config.ablation.o_fdc) {
      TemplateResolver resolver(model, report, config, code.model_document);
      FdcResult fdc = timed("fdc", [&] {
        return run_fdc(model, report, solution, config.L, config.gamma, std::nullopt, resolver, config.epsilon);
      });
      rec.fdc_iterations = fdc.state.l;
      rec.trace["fdc"] = to_json(fdc.state);
      feas = fdc.feasibility;
      rec.trace["final_feasibility"] = to_json(feas);
      if (fdc.solution) solution = *fdc.solution;
    }
    rec.V = feas.V;
    rec.x_star = solution.x_star;
    try {
      const double f = evaluate(model.objective, solution.x_star);
      rec.objective = model.metadata.maximize ? -f : f;
    } catch (const DomainError&) {
      rec.objective.reset();
    }
    if (rec.V == 1) {
      finish(rec, RunOutcome::Success, "feasible solution");
    } else {
      finish(rec, RunOutcome::Infeasible, feas.reason.empty() ? "no feasible point found" : feas.reason);
    }
  } catch (const std::exception& e) {
    rec.Q = 0;
    rec.V = 0;
    finish(rec, RunOutcome::InternalError, e.what());
  }
  keep_exchanges();
  return rec;
}

}  // namespace optira
