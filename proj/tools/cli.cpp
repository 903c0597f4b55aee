#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "optira/bench.hpp"
#include "optira/convexify.hpp"
#include "optira/curvature.hpp"
#include "optira/error.hpp"
#include "optira/extraction.hpp"
#include "optira/interval.hpp"
#include "optira/model_json.hpp"
#include "optira/parse.hpp"

namespace optira::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Success: return kExitOk;
    case RunOutcome::InputFailure: return kExitInput;
    case RunOutcome::BackendFailure:
    case RunOutcome::ModelFailure: return kExitBackend;
    case RunOutcome::Infeasible:
    case RunOutcome::ExecutionFailed:
    case RunOutcome::Inconsistent: return kExitInfeasible;
    case RunOutcome::InternalError: return kExitInternal;
  }
  return kExitInternal;
}

namespace {

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(n == 0 ? 1u : n, 1u, 8u));
}

struct Settings {
  std::string backend;  // mock, remote, none; empty picks mock iff a script is given
  std::string mock_script;
  std::vector<std::string> ablate;
  int K = kDefaultEclCap;
  int L = kDefaultFdcCap;
  int N = 10;
  double epsilon = kDefaultEpsilon;
  int jobs = default_jobs();
  std::string out_dir = "optira-out";
  bool verbose = false;
  std::string endpoint = BackendConfig{}.endpoint;
  std::string model_name = BackendConfig{}.model;
  std::string api_key_env = BackendConfig{}.api_key_env;
  std::string runner;
  std::string target = "internal";
  double time_limit = Limits{}.wall_seconds;

  std::string problem;
  std::string text;
  std::string problem_id;
  std::string stage;
};

void add_backend_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("--backend", s.backend, "LLM backend: mock, remote or none")
      ->check(CLI::IsMember({"mock", "remote", "none"}));
  cmd->add_option("--mock-script", s.mock_script, "YAML script for the mock backend");
  cmd->add_option("--endpoint", s.endpoint, "chat-completion URL for the remote backend");
  cmd->add_option("--model-name", s.model_name, "model requested from the remote backend");
  cmd->add_option("--api-key-env", s.api_key_env, "environment variable holding the API key");
  cmd->add_flag("--verbose,-v", s.verbose, "keep SCA traces in run records, log progress");
}

void add_pipeline_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("--ablate", s.ablate, "omit components: o-convex, o-ecl, o-fdc")
      ->check(CLI::IsMember({"o-convex", "o-ecl", "o-fdc"}))
      ->delimiter(',');
  cmd->add_option("--K", s.K, "error correction cap")->check(CLI::Range(1, 20));
  cmd->add_option("--L", s.L, "feasibility correction cap")->check(CLI::Range(1, 20));
  cmd->add_option("--epsilon", s.epsilon, "feasibility tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", s.out_dir, "directory for run records and reports");
  cmd->add_option("--runner", s.runner, "external runner executable");
  cmd->add_option("--target", s.target, "execution target: internal or external-runner")
      ->check(CLI::IsMember({"internal", "external-runner"}));
  cmd->add_option("--time-limit", s.time_limit, "wall-clock seconds per execution")->check(CLI::PositiveNumber);
}

void add_problem_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("problem", s.problem, "problem file: plain text, a problem object or a corpus");
  cmd->add_option("--text", s.text, "problem text given inline");
  cmd->add_option("--problem-id", s.problem_id, "problem to pick when the file is a corpus");
}

std::unique_ptr<LlmBackend> backend_for(const Settings& s) {
  const std::string kind = !s.backend.empty() ? s.backend : (s.mock_script.empty() ? "none" : "mock");
  if (kind == "none") return nullptr;
  BackendConfig cfg;
  cfg.kind = kind == "mock" ? BackendKind::Mock : BackendKind::Remote;
  cfg.mock_script = s.mock_script;
  cfg.endpoint = s.endpoint;
  cfg.model = s.model_name;
  cfg.api_key_env = s.api_key_env;
  return make_backend(cfg);
}

PipelineConfig pipeline_for(const Settings& s) {
  PipelineConfig cfg;
  cfg.K = s.K;
  cfg.L = s.L;
  cfg.epsilon = s.epsilon;
  std::string ablation;
  for (const std::string& a : s.ablate) ablation += (ablation.empty() ? "" : "+") + a;
  cfg.ablation = parse_ablation(ablation);
  cfg.target = parse_target(s.target);
  cfg.execution.runner = s.runner;
  cfg.execution.limits.wall_seconds = s.time_limit;
  cfg.verbose = s.verbose;
  cfg.validate();
  return cfg;
}

PipelineInput load_problem(const Settings& s) {
  if (!s.text.empty()) return {s.problem_id.empty() ? "inline" : s.problem_id, s.text, std::nullopt};
  if (s.problem.empty()) throw InputError("give a problem file or --text");
  std::ifstream in(s.problem, std::ios::binary);
  if (!in || fs::is_directory(s.problem)) throw InputError("cannot open problem file " + s.problem);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  const json doc = json::parse(content, nullptr, false);
  if (doc.is_discarded() || !(doc.is_object() || doc.is_array())) {
    return {fs::path(s.problem).stem().string(), content, std::nullopt};
  }
  const std::vector<CorpusProblem> problems =
      parse_corpus(doc.is_array() ? content : "[" + content + "]", s.problem);
  const CorpusProblem* pick = nullptr;
  if (!s.problem_id.empty()) {
    for (const CorpusProblem& p : problems) {
      if (p.id == s.problem_id) pick = &p;
    }
    if (pick == nullptr) throw InputError("no problem '" + s.problem_id + "' in " + s.problem);
  } else if (problems.size() == 1) {
    pick = &problems.front();
  } else {
    throw InputError(s.problem + " holds several problems; pick one with --problem-id");
  }
  return {pick->id, pick->text, pick->reference_model};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

std::string vector_text(const Eigen::VectorXd& x, const StandardForm* p) {
  std::string out;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (k) out += ", ";
    if (p) out += p->variables[static_cast<std::size_t>(k)].name + "=";
    out += format_number(x[k]);
  }
  return out;
}

int cmd_solve(const Settings& s, std::ostream& out) {
  const PipelineInput input = load_problem(s);
  const PipelineConfig cfg = pipeline_for(s);
  std::unique_ptr<LlmBackend> backend = backend_for(s);
  const RunRecord rec = run_pipeline(input, backend.get(), cfg);

  fs::create_directories(s.out_dir);
  const fs::path dir(s.out_dir);
  write_file(dir / "run.json", to_json(rec).dump(2) + "\n");
  if (rec.trace.contains("model")) write_file(dir / "model.json", rec.trace["model"].dump(2) + "\n");

  std::ostringstream summary;
  summary << "problem:  " << rec.problem_id << "\n"
          << "outcome:  " << to_string(rec.outcome) << "\n"
          << "T=" << rec.T << " Q=" << rec.Q << " V=" << rec.V << "  ecl k=" << rec.ecl_iterations
          << "  fdc l=" << rec.fdc_iterations << "\n";
  if (rec.x_star) {
    StandardForm model;
    const bool have_model = rec.trace.contains("model");
    if (have_model) model = model_from_json(rec.trace["model"]);
    summary << "x*:       " << vector_text(*rec.x_star, have_model ? &model : nullptr) << "\n";
  }
  if (rec.objective) summary << "objective " << format_number(*rec.objective) << "\n";
  summary << "message:  " << rec.message << "\n";
  write_file(dir / "summary.txt", summary.str());
  if (rec.x_star) {
    json sol{{"x_star", std::vector<double>(rec.x_star->data(), rec.x_star->data() + rec.x_star->size())},
             {"objective", rec.objective ? json(*rec.objective) : json(nullptr)},
             {"V", rec.V}};
    write_file(dir / "solution.json", sol.dump(2) + "\n");
  }
  out << summary.str();
  return exit_code_for(rec.outcome);
}

int cmd_bench(const Settings& s, std::ostream& out, std::ostream& err) {
  const std::vector<CorpusProblem> corpus = load_corpus(s.problem);
  BenchOptions opts;
  opts.N = s.N;
  opts.jobs = s.jobs;
  opts.out_dir = s.out_dir;
  opts.pipeline = pipeline_for(s);
  std::unique_ptr<LlmBackend> backend = backend_for(s);
  if (s.verbose) err << "running " << corpus.size() << " problems x " << s.N << " trials on " << s.jobs << " workers\n";
  const BenchResult res = run_benchmark(corpus, backend.get(), opts);
  const Report rep = emit_report(res.records, res.metrics);
  const fs::path dir(s.out_dir);
  write_file(dir / "metrics.json", to_json(res.metrics).dump(2) + "\n");
  write_file(dir / "report.json", rep.json.dump(2) + "\n");
  write_file(dir / "report.txt", rep.text);
  out << rep.text;
  return kExitOk;
}

StandardForm model_for(const Settings& s, const PipelineInput& input, std::ostream& out) {
  std::unique_ptr<LlmBackend> backend = backend_for(s);
  if (!backend) {
    if (!input.reference_model) throw InputError("no backend configured and the problem has no reference model");
    out << "model: reference model of " << input.id << "\n";
    return *input.reference_model;
  }
  Conversation conv(*backend, input.id);
  const ConstructedModel built = construct_model(input.text, conv);
  out << "model: built by the " << backend->name() << " backend, " << built.rebuilds << " rebuild(s)\n"
      << "consistency: " << to_json(built.consistency).dump() << "\n";
  return built.model;
}

void print_model(const StandardForm& p, std::ostream& out) {
  out << "variables:\n";
  for (const Variable& v : p.variables) {
    out << "  " << v.name << " " << to_string(v.type) << " [" << format_number(v.lower) << ", "
        << format_number(v.upper) << "]" << (v.unit.empty() ? "" : " " + v.unit) << "\n";
  }
  out << "minimize " << to_string(p.objective) << (p.metadata.maximize ? "   (source: maximize)" : "") << "\n";
  for (std::size_t i = 0; i < p.m(); ++i) out << "  g" << i << ": " << to_string(p.inequalities[i].lhs) << " <= 0\n";
  for (std::size_t j = 0; j < p.n(); ++j) out << "  h" << j << ": " << to_string(p.equalities[j].lhs) << " == 0\n";
}

int cmd_inspect(const Settings& s, std::ostream& out) {
  const PipelineInput input = load_problem(s);
  const StandardForm p = model_for(s, input, out);
  if (s.stage == "model") {
    print_model(p, out);
    return kExitOk;
  }
  const ConvexityReport report = analyze_problem(p);
  if (s.stage == "curvature") {
    const std::vector<Interval> box = variable_intervals(p.variables);
    auto line = [&](const std::string& what, const Expr& e) {
      const CurvatureResult c = curvature_of(e, box);
      out << "  " << what << ": " << to_string(c.curvature) << (c.sampled ? " (sampled)" : "") << ", sign "
          << to_string(c.sign) << (c.reason.empty() ? "" : " - " + c.reason) << "\n";
    };
    line("objective", p.objective);
    for (std::size_t i = 0; i < p.m(); ++i) line("g" + std::to_string(i), p.inequalities[i].lhs);
    for (std::size_t j = 0; j < p.n(); ++j) line("h" + std::to_string(j), p.equalities[j].lhs);
    for (const Offender& o : report.offenders) {
      out << "  offender " << describe(o.location) << ": " << to_string(o.expression) << " - " << o.reason << "\n";
    }
    out << "problem " << (report.problem_convex ? "convex" : "non-convex") << ", " << report.offenders.size()
        << " offenders\n";
    return kExitOk;
  }
  // convexify
  if (report.problem_convex) {
    out << "problem convex, nothing to convexify\n";
    print_model(p, out);
    return kExitOk;
  }
  const Strategy strategy = select_strategy(report, 0);
  const ConvexifiedProblem cp = convexify(p, report, strategy, box_center(p));
  out << "strategy: " << strategy.label() << "\n"
      << "anchor:   " << vector_text(cp.anchor, &p) << "\n"
      << "linearized terms: " << cp.linearized << "\n";
  for (const ComponentMapping& m : cp.mapping) {
    auto component = [](const StandardForm& q, const Location& loc) {
      switch (loc.kind) {
        case ComponentKind::Objective: return to_string(q.objective);
        case ComponentKind::Inequality: return to_string(q.inequalities[loc.index].lhs) + " <= 0";
        case ComponentKind::Equality: return to_string(q.equalities[loc.index].lhs) + " == 0";
        case ComponentKind::VariableType: return std::string(q.variables[loc.index].name);
      }
      return std::string();
    };
    out << "  " << describe(m.original) << " [" << m.transform << "]\n"
        << "    original:  " << component(p, m.original) << "\n"
        << "    surrogate: " << component(cp.surrogate, m.surrogate) << "\n";
  }
  return kExitOk;
}

struct Parser {
  CLI::App app{"optira: optimization modeling and solving with LLM assistance"};
  Settings s;
  CLI::App* solve = nullptr;
  CLI::App* bench = nullptr;
  CLI::App* inspect = nullptr;

  Parser() {
    app.set_config("--config", "", "TOML config file; flags override it");
    app.require_subcommand(1);
    solve = app.add_subcommand("solve", "run the full pipeline on one problem");
    add_problem_flags(solve, s);
    add_backend_flags(solve, s);
    add_pipeline_flags(solve, s);

    bench = app.add_subcommand("bench", "run a corpus N times and report the rates");
    bench->add_option("corpus", s.problem, "corpus file")->required();
    add_backend_flags(bench, s);
    add_pipeline_flags(bench, s);
    bench->add_option("--N", s.N, "trials per problem")->check(CLI::Range(1, 100));
    bench->add_option("--jobs", s.jobs, "worker threads")->check(CLI::Range(1, 1024));

    inspect = app.add_subcommand("inspect", "stop the pipeline at a stage and print it");
    inspect->add_option("stage", s.stage, "model, curvature or convexify")
        ->required()
        ->check(CLI::IsMember({"model", "curvature", "convexify"}));
    add_problem_flags(inspect, s);
    add_backend_flags(inspect, s);
  }
};

}  // namespace

std::vector<std::string> registered_flags() {
  Parser p;
  std::vector<std::string> out;
  auto collect = [&](const CLI::App* app) {
    for (const CLI::Option* o : app->get_options()) {
      for (const std::string& n : o->get_lnames()) out.push_back("--" + n);
    }
  };
  collect(&p.app);
  for (const CLI::App* sub : p.app.get_subcommands({})) collect(sub);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parser p;
  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    p.app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << p.app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << p.app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (CLI::App* c : {p.solve, p.bench, p.inspect}) {
      if (c->parsed()) sub = c;
    }
    err << (sub ? sub->help() : p.app.help());
    return kExitInput;
  }
  try {
    if (p.solve->parsed()) return cmd_solve(p.s, out);
    if (p.bench->parsed()) return cmd_bench(p.s, out, err);
    return cmd_inspect(p.s, out);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SchemaError& e) {
    err << "backend reply error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace optira::cli
