#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optira/convexify.hpp"
#include "optira/error.hpp"
#include "optira/llm.hpp"
#include "optira/solver.hpp"

namespace optira {

enum class Target { Internal, ExternalRunner };
enum class Provenance { Llm, Template };
enum class ErrorClass { Syntax, MissingSymbol, SolverRejection, Timeout, Crash, Schema };

std::string_view to_string(Target t);
Target parse_target(std::string_view s);
std::string_view to_string(Provenance p);
std::string_view to_string(ErrorClass c);
ErrorClass parse_error_class(std::string_view s);

inline constexpr std::string_view kScriptHeader = "# optira-script/1";
inline constexpr std::string_view kRunnerProtocol = "optira-runner/1";
inline constexpr std::string_view kModelPlaceholder = "$MODEL";

struct GeneratedCode {
  std::string script;
  Target target = Target::Internal;
  std::string model_document;  // canonical JSON text
  Provenance provenance = Provenance::Template;
};

nlohmann::json to_json(const GeneratedCode& c);

struct ErrorReport {
  ErrorClass error_class = ErrorClass::Crash;
  std::string message;
  std::string excerpt;
};

nlohmann::json to_json(const ErrorReport& r);

struct ExecutionOutcome {
  int Q = 0;
  std::optional<Solution> solution;  // iff Q = 1
  std::optional<ErrorReport> error;  // iff Q = 0
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const ExecutionOutcome& o);

struct Limits {
  double wall_seconds = 30.0;
  std::size_t memory_bytes = std::size_t{512} << 20;
};

/// Everything execute() needs besides the code itself.
struct ExecutionContext {
  Limits limits;
  SolverOptions solver;       // defaults the script may override
  std::string runner;         // external runner executable; empty = not installed
  std::string runner_solver = "modeling-solver";
};

/// A script failure with its taxonomy class.
class ScriptError : public Error {
 public:
  ScriptError(ErrorClass c, const std::string& message, std::string excerpt = {})
      : Error(message), class_(c), excerpt_(std::move(excerpt)) {}
  ErrorClass error_class() const { return class_; }
  const std::string& excerpt() const { return excerpt_; }

 private:
  ErrorClass class_;
  std::string excerpt_;
};

/// Canonical model document for a convexified problem. When SCA terms were
/// linearized the document carries the original problem and strategy so the
/// executor can iterate the anchor.
nlohmann::json model_document(const ConvexifiedProblem& cp, const StandardForm& original);
/// Wraps a problem that needed no convexification.
ConvexifiedProblem identity_convexification(const StandardForm& p);

/// Solves a model document: SCA loop when it carries a convexification
/// section, a single convex solve otherwise. Throws ScriptError.
Solution solve_document(const nlohmann::json& document, const Eigen::VectorXd* start,
                        const SolverOptions& opts);

using StartPoint = std::vector<std::pair<std::string, double>>;
/// Deterministic template for a target.
std::string template_script(Target target, const std::string& document, const SolverOptions& opts,
                            const StartPoint& start = {});

/// Generates C_gen. With a conversation the backend writes the script,
/// otherwise the template is used. Throws ScriptError(schema) when the
/// generated script does not embed the model document.
GeneratedCode generate_script(const ConvexifiedProblem& cp, const StandardForm& original,
                              Target target, Conversation* conversation,
                              const SolverOptions& opts = {});
/// Extracts the script from a backend reply and checks the model embedding.
GeneratedCode code_from_reply(const std::string& reply, Target target, const std::string& document);
void check_embeds_model(const std::string& script, const std::string& document);

/// Internal-target interpreter for optira-script/1.
struct ScriptProgram {
  std::string model_text;
  SolverOptions options;
  std::vector<std::pair<std::string, double>> start;
  bool solve = false;
};
ScriptProgram parse_script(const std::string& script, const std::string& document,
                           const SolverOptions& defaults);
Solution run_script(const std::string& script, const std::string& document,
                    const SolverOptions& defaults);

/// Runs generated code. Never throws: every failure becomes a Q = 0 outcome.
ExecutionOutcome execute(const GeneratedCode& code, const ExecutionContext& ctx);

/// Parses one runner reply line; non-conforming replies become schema errors.
ExecutionOutcome outcome_from_reply(const std::string& line);
nlohmann::json runner_request(const GeneratedCode& code, const ExecutionContext& ctx);

// ---- child processes -----------------------------------------------------

struct ChildResult {
  int exit_code = -1;
  int signal = 0;
  bool timed_out = false;
  std::string out;
  std::string err;
  double wall_seconds = 0.0;
  std::string scratch_dir;  // removed after the run
};

/// Runs `argv` with `input` on stdin inside a fresh scratch directory:
/// scrubbed environment, address-space limit, wall-clock kill, and (where the
/// kernel supports it) Landlock confining writes to the scratch directory.
ChildResult run_child(const std::vector<std::string>& argv, const std::string& input,
                      const Limits& limits);

/// True when the kernel accepted the Landlock ruleset in the last child.
bool landlock_supported();

}  // namespace optira
