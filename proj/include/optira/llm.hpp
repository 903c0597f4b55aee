#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace optira {

enum class Stage { Extract, Reformat, Model, RepairModel, Consistency, Codegen, RepairCode };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
std::span<const Stage> all_stages();

/// One prompt/response pair as it appears in the run record.
struct Exchange {
  Stage stage = Stage::Extract;
  std::string prompt;
  std::string response;
  std::string error;
};

nlohmann::json to_json(const Exchange& e);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(Stage stage, const std::string& prompt) = 0;
  /// A handle for one pipeline run. The mock restarts its script; the remote
  /// client shares its rate limiter.
  virtual std::unique_ptr<LlmBackend> session() const = 0;
  virtual std::string name() const = 0;
};

/// Wraps a backend and records every exchange for the run record.
class Conversation {
 public:
  Conversation(LlmBackend& backend, std::string problem_id)
      : backend_(backend), problem_id_(std::move(problem_id)) {}

  std::string ask(Stage stage, const std::string& prompt);
  const std::string& problem_id() const { return problem_id_; }
  const std::vector<Exchange>& exchanges() const { return log_; }

 private:
  LlmBackend& backend_;
  std::string problem_id_;
  std::vector<Exchange> log_;
};

// ---- mock ----------------------------------------------------------------

enum class ExhaustionPolicy { Error, RepeatLast };

struct MockEntry {
  Stage stage = Stage::Extract;
  std::string match;  // substring of the prompt digest; empty matches anything
  std::string response;
};

struct MockScript {
  std::vector<MockEntry> entries;
  ExhaustionPolicy policy = ExhaustionPolicy::Error;
};

/// Parses the YAML mock script format (see docs/formats.md).
MockScript parse_mock_script(const std::string& text);
MockScript load_mock_script(const std::string& path);

/// Stage tag plus the first 64 characters of the prompt.
std::string prompt_digest(Stage stage, std::string_view prompt);

class MockBackend : public LlmBackend {
 public:
  explicit MockBackend(MockScript script);

  std::string complete(Stage stage, const std::string& prompt) override;
  std::unique_ptr<LlmBackend> session() const override;
  std::string name() const override { return "mock"; }
  std::size_t consumed() const;

 private:
  MockScript script_;
  mutable std::mutex mutex_;
  std::vector<bool> used_;
  std::vector<std::optional<std::size_t>> last_;  // per stage
};

// ---- remote --------------------------------------------------------------

enum class BackendKind { Remote, Mock };

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  std::string api_key_env = "OPTIRA_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  double requests_per_minute = 60.0;
  std::string mock_script;  // path, mock kind only

  void validate() const;
};

/// Count of outbound HTTP requests made by any remote backend in this process.
std::size_t network_calls();

/// Builds a backend from configuration. The remote kind checks its API key
/// here, before anything touches the network.
std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config);
std::unique_ptr<LlmBackend> make_remote_backend(const BackendConfig& config);

}  // namespace optira
