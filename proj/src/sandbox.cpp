#include "optira/sandbox.hpp"

#include <unistd.h>

#include <iostream>
#include <sstream>

#include "optira/model_json.hpp"
#include "optira/parse.hpp"
#include "optira/prompts.hpp"

namespace optira {

std::string_view to_string(Target t) {
  return t == Target::Internal ? "internal" : "external-runner";
}

Target parse_target(std::string_view s) {
  if (s == "internal") return Target::Internal;
  if (s == "external-runner" || s == "external") return Target::ExternalRunner;
  throw InputError("unknown target '" + std::string(s) + "'");
}

std::string_view to_string(Provenance p) { return p == Provenance::Llm ? "llm" : "template"; }

std::string_view to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::Syntax: return "syntax";
    case ErrorClass::MissingSymbol: return "missing-symbol";
    case ErrorClass::SolverRejection: return "solver-rejection";
    case ErrorClass::Timeout: return "timeout";
    case ErrorClass::Crash: return "crash";
    case ErrorClass::Schema: return "schema";
  }
  return "?";
}

ErrorClass parse_error_class(std::string_view s) {
  for (ErrorClass c : {ErrorClass::Syntax, ErrorClass::MissingSymbol, ErrorClass::SolverRejection,
                       ErrorClass::Timeout, ErrorClass::Crash, ErrorClass::Schema}) {
    if (to_string(c) == s) return c;
  }
  throw SchemaError("unknown error class '" + std::string(s) + "'");
}

nlohmann::json to_json(const GeneratedCode& c) {
  return {{"script", c.script},
          {"target", to_string(c.target)},
          {"provenance", to_string(c.provenance)}};
}

nlohmann::json to_json(const ErrorReport& r) {
  return {{"class", to_string(r.error_class)}, {"message", r.message}, {"excerpt", r.excerpt}};
}

nlohmann::json to_json(const ExecutionOutcome& o) {
  nlohmann::json doc{{"Q", o.Q}};
  if (o.solution) doc["solution"] = to_json(*o.solution);
  if (o.error) doc["error"] = to_json(*o.error);
  return doc;
}

nlohmann::json model_document(const ConvexifiedProblem& cp, const StandardForm& original) {
  nlohmann::json doc = to_json(cp.surrogate);
  if (cp.linearized > 0) {
    Strategy s = cp.strategy;
    s.anchor = cp.anchor;
    doc["convexification"] = {{"strategy", to_json(s)}, {"original", to_json(original)}};
  }
  return doc;
}

ConvexifiedProblem identity_convexification(const StandardForm& p) {
  ConvexifiedProblem cp;
  cp.surrogate = p;
  cp.anchor = box_center(p);
  cp.mapping.push_back({{ComponentKind::Objective, 0}, {ComponentKind::Objective, 0}, "kept"});
  for (std::size_t i = 0; i < p.m(); ++i) {
    cp.mapping.push_back({{ComponentKind::Inequality, i}, {ComponentKind::Inequality, i}, "kept"});
  }
  for (std::size_t j = 0; j < p.n(); ++j) {
    cp.mapping.push_back({{ComponentKind::Equality, j}, {ComponentKind::Equality, j}, "kept"});
  }
  return cp;
}

Solution solve_document(const nlohmann::json& document, const Eigen::VectorXd* start,
                        const SolverOptions& opts) {
  Solution sol;
  try {
    if (!document.is_object() || document.value("format", "") != kModelFormat) {
      throw SchemaError(std::string("model document must declare format ") + kModelFormat);
    }
    if (document.contains("convexification")) {
      const auto& section = document.at("convexification");
      const StandardForm original = model_from_json(section.at("original"));
      const Strategy strategy = strategy_from_json(section.at("strategy"));
      const Eigen::VectorXd x0 =
          start ? *start : (strategy.anchor ? *strategy.anchor : box_center(original));
      sol = sca_loop(original, analyze_problem(original), strategy, x0, opts);
    } else {
      const StandardForm p = model_from_json(document);
      sol = solve_convex(p, start ? *start : box_center(p), opts);
    }
  } catch (const ScriptError&) {
    throw;
  } catch (const SchemaError& e) {
    throw ScriptError(ErrorClass::Schema, e.what());
  } catch (const ParseError& e) {
    throw ScriptError(ErrorClass::Schema, e.what());
  } catch (const ModelError& e) {
    throw ScriptError(ErrorClass::Schema, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ScriptError(ErrorClass::Schema, e.what());
  } catch (const SolverRejection& e) {
    throw ScriptError(ErrorClass::SolverRejection, e.what());
  } catch (const ConvexificationError& e) {
    throw ScriptError(ErrorClass::SolverRejection, e.what());
  } catch (const TimeoutError& e) {
    throw ScriptError(ErrorClass::Timeout, e.what());
  } catch (const std::exception& e) {
    throw ScriptError(ErrorClass::Crash, e.what());
  }
  if (sol.status == SolveStatus::InfeasibleSubproblem) {
    throw ScriptError(ErrorClass::SolverRejection, "infeasible subproblem: " + sol.message);
  }
  if (sol.status == SolveStatus::NumericalFailure) {
    throw ScriptError(ErrorClass::Crash, "numerical failure: " + sol.message);
  }
  return sol;
}

std::string template_script(Target target, const std::string& document, const SolverOptions& opts,
                            const StartPoint& start) {
  std::ostringstream out;
  if (target == Target::Internal) {
    out << kScriptHeader << "\n"
        << "# template\n"
        << "model " << document << "\n"
        << "set tolerance " << format_number(opts.tolerance) << "\n"
        << "set max_inner " << opts.max_inner << "\n"
        << "set max_outer " << opts.max_outer << "\n"
        << "set sca_threshold " << format_number(opts.sca_threshold) << "\n"
        << "set damping " << format_number(opts.damping) << "\n";
    for (const auto& [name, value] : start) out << "start " << name << " " << format_number(value) << "\n";
    out << "solve\n";
  } else {
    out << "# optira-runner template\n"
        << "import json\n"
        << "MODEL = json.loads(r'''" << document << "''')\n"
        << "OPTIONS = {\"tolerance\": " << format_number(opts.tolerance)
        << ", \"max_inner\": " << opts.max_inner << ", \"max_outer\": " << opts.max_outer << "}\n"
        << "START = {";
    for (std::size_t i = 0; i < start.size(); ++i) {
      out << (i ? ", " : "") << "\"" << start[i].first << "\": " << format_number(start[i].second);
    }
    out << "}\n"
        << "result = solve(MODEL, start=START, **OPTIONS)\n";
  }
  return out.str();
}

void check_embeds_model(const std::string& script, const std::string& document) {
  if (script.find(document) == std::string::npos &&
      script.find(kModelPlaceholder) == std::string::npos) {
    throw ScriptError(ErrorClass::Schema, "generated script does not embed the model document",
                      script.substr(0, 200));
  }
}

GeneratedCode code_from_reply(const std::string& reply, Target target, const std::string& document) {
  GeneratedCode code;
  code.target = target;
  code.model_document = document;
  code.provenance = Provenance::Llm;
  code.script = fenced_block(reply).value_or(reply);
  check_embeds_model(code.script, document);
  return code;
}

GeneratedCode generate_script(const ConvexifiedProblem& cp, const StandardForm& original,
                              Target target, Conversation* conversation, const SolverOptions& opts) {
  const std::string document = canonical_text(model_document(cp, original));
  const std::string tpl = template_script(target, document, opts);
  if (conversation == nullptr) {
    return {tpl, target, document, Provenance::Template};
  }
  const std::string prompt = render_prompt(
      Stage::Codegen, conversation->problem_id(),
      {{"target", std::string(to_string(target))}, {"model", document}, {"template", tpl}});
  return code_from_reply(conversation->ask(Stage::Codegen, prompt), target, document);
}

nlohmann::json runner_request(const GeneratedCode& code, const ExecutionContext& ctx) {
  nlohmann::json model;
  try {
    model = nlohmann::json::parse(code.model_document);
  } catch (const nlohmann::json::exception&) {
    model = code.model_document;
  }
  return {{"protocol", kRunnerProtocol},
          {"model", model},
          {"solver", ctx.runner_solver},
          {"options",
           {{"tolerance", ctx.solver.tolerance},
            {"max_inner", ctx.solver.max_inner},
            {"max_outer", ctx.solver.max_outer},
            {"time_limit", ctx.limits.wall_seconds}}},
          {"script", code.script}};
}

namespace {

ExecutionOutcome failed(ErrorClass c, std::string message, std::string excerpt = {}) {
  ExecutionOutcome o;
  o.Q = 0;
  o.error = ErrorReport{c, std::move(message), std::move(excerpt)};
  return o;
}

std::string tail(const std::string& s, std::size_t n) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

ExecutionOutcome execute_internal(const GeneratedCode& code, const ExecutionContext& ctx) {
  SolverOptions opts = ctx.solver;
  opts.deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(ctx.limits.wall_seconds));
  try {
    ExecutionOutcome o;
    o.solution = run_script(code.script, code.model_document, opts);
    o.Q = 1;
    return o;
  } catch (const ScriptError& e) {
    return failed(e.error_class(), e.what(), e.excerpt());
  } catch (const TimeoutError& e) {
    return failed(ErrorClass::Timeout, e.what());
  } catch (const std::exception& e) {
    return failed(ErrorClass::Crash, e.what());
  }
}

ExecutionOutcome execute_external(const GeneratedCode& code, const ExecutionContext& ctx) {
  const std::string request = runner_request(code, ctx).dump() + "\n";
  ChildResult r;
  try {
    r = run_child({ctx.runner}, request, ctx.limits);
  } catch (const std::exception& e) {
    return failed(ErrorClass::Crash, e.what());
  }
  if (r.timed_out) {
    return failed(ErrorClass::Timeout, "runner exceeded the wall-clock limit", tail(r.err, 200));
  }
  const auto newline = r.out.find('\n');
  const std::string line = r.out.substr(0, newline);
  if (line.empty()) {
    if (r.signal != 0) {
      return failed(ErrorClass::Crash, "runner killed by signal " + std::to_string(r.signal),
                    tail(r.err, 200));
    }
    if (r.exit_code != 0) {
      return failed(ErrorClass::Crash, "runner exited with status " + std::to_string(r.exit_code),
                    tail(r.err, 200));
    }
    return failed(ErrorClass::Schema, "runner produced no reply", tail(r.err, 200));
  }
  ExecutionOutcome o = outcome_from_reply(line);
  if (o.Q == 1) {
    const auto doc = nlohmann::json::parse(code.model_document, nullptr, false);
    const std::size_t n = doc.is_object() && doc.contains("variables") ? doc["variables"].size() : 0;
    if (static_cast<std::size_t>(o.solution->x_star.size()) != n) {
      return failed(ErrorClass::Schema, "x_star has " + std::to_string(o.solution->x_star.size()) +
                                            " entries, the model has " + std::to_string(n) + " variables");
    }
  }
  return o;
}

}  // namespace

ExecutionOutcome outcome_from_reply(const std::string& line) {
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    return failed(ErrorClass::Schema, "runner reply is not JSON", line.substr(0, 200));
  }
  if (!reply.is_object() || !reply.contains("status") || !reply["status"].is_string()) {
    return failed(ErrorClass::Schema, "runner reply lacks a status", line.substr(0, 200));
  }
  const std::string status = reply["status"];
  if (status == "error" || status == "infeasible") {
    std::string message = status == "infeasible" ? "runner reported infeasible" : "runner error";
    ErrorClass c = status == "infeasible" ? ErrorClass::SolverRejection : ErrorClass::Crash;
    if (reply.contains("error") && reply["error"].is_object()) {
      const auto& err = reply["error"];
      if (err.contains("message") && err["message"].is_string()) message = err["message"];
      if (err.contains("class")) {
        if (!err["class"].is_string()) return failed(ErrorClass::Schema, "error class must be a string");
        try {
          c = parse_error_class(err["class"].get<std::string>());
        } catch (const SchemaError& e) {
          return failed(ErrorClass::Schema, e.what(), line.substr(0, 200));
        }
      }
    } else if (status == "error") {
      return failed(ErrorClass::Schema, "error reply without an error object", line.substr(0, 200));
    }
    return failed(c, message);
  }
  if (status != "optimal" && status != "max-iter") {
    return failed(ErrorClass::Schema, "unknown reply status '" + status + "'");
  }
  if (!reply.contains("x_star") || !reply["x_star"].is_array() || !reply.contains("objective") ||
      !reply["objective"].is_number()) {
    return failed(ErrorClass::Schema, "solution reply needs x_star and objective", line.substr(0, 200));
  }
  Solution s;
  s.status = parse_solve_status(status);
  s.x_star.resize(static_cast<Eigen::Index>(reply["x_star"].size()));
  for (std::size_t i = 0; i < reply["x_star"].size(); ++i) {
    const auto& v = reply["x_star"][i];
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      return failed(ErrorClass::Schema, "x_star entries must be finite numbers");
    }
    s.x_star[static_cast<Eigen::Index>(i)] = v.get<double>();
  }
  s.objective = reply["objective"].get<double>();
  if (reply.contains("kkt") && reply["kkt"].is_object()) {
    const auto& k = reply["kkt"];
    auto field = [&](const char* name) {
      return k.contains(name) && k[name].is_number() ? k[name].get<double>() : 0.0;
    };
    s.kkt = {field("stationarity"), field("primal"), field("complementarity")};
  }
  s.iterations = reply.value("iterations", 0);
  ExecutionOutcome o;
  o.Q = 1;
  o.solution = std::move(s);
  return o;
}

ExecutionOutcome execute(const GeneratedCode& code, const ExecutionContext& ctx) {
  const auto started = std::chrono::steady_clock::now();
  ExecutionOutcome o;
  if (!(ctx.limits.wall_seconds > 0) || ctx.limits.memory_bytes == 0) {
    o = failed(ErrorClass::Crash, "execution limits must be positive");
  } else if (code.target == Target::ExternalRunner) {
    if (!ctx.runner.empty() && access(ctx.runner.c_str(), X_OK) == 0) {
      o = execute_external(code, ctx);
    } else {
      std::clog << "warning: external runner not found; using the internal target\n";
      GeneratedCode internal = code;
      internal.target = Target::Internal;
      internal.script = template_script(Target::Internal, code.model_document, ctx.solver);
      o = execute_internal(internal, ctx);
    }
  } else {
    o = execute_internal(code, ctx);
  }
  o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return o;
}

}  // namespace optira
