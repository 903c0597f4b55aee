#include "optira/llm.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "optira/error.hpp"

namespace optira {

namespace {
constexpr std::array kStages{Stage::Extract,     Stage::Reformat, Stage::Model,
                             Stage::RepairModel, Stage::Consistency, Stage::Codegen,
                             Stage::RepairCode};
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Extract: return "extract";
    case Stage::Reformat: return "reformat";
    case Stage::Model: return "model";
    case Stage::RepairModel: return "repair-model";
    case Stage::Consistency: return "consistency";
    case Stage::Codegen: return "codegen";
    case Stage::RepairCode: return "repair-code";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : kStages) {
    if (to_string(st) == s) return st;
  }
  throw InputError("unknown stage tag '" + std::string(s) + "'");
}

std::span<const Stage> all_stages() { return kStages; }

nlohmann::json to_json(const Exchange& e) {
  nlohmann::json doc{{"stage", to_string(e.stage)}, {"prompt", e.prompt}, {"response", e.response}};
  if (!e.error.empty()) doc["error"] = e.error;
  return doc;
}

std::string Conversation::ask(Stage stage, const std::string& prompt) {
  Exchange ex{stage, prompt, {}, {}};
  try {
    ex.response = backend_.complete(stage, prompt);
  } catch (const std::exception& e) {
    ex.error = e.what();
    log_.push_back(std::move(ex));
    throw;
  }
  log_.push_back(ex);
  return ex.response;
}

std::string prompt_digest(Stage stage, std::string_view prompt) {
  return std::string(to_string(stage)) + ":" + std::string(prompt.substr(0, 64));
}

MockScript parse_mock_script(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw InputError(std::string("mock script: ") + e.what());
  }
  if (!root.IsMap()) throw InputError("mock script: top level must be a mapping");
  MockScript script;
  const std::string policy = root["policy"] ? root["policy"].as<std::string>() : "error";
  if (policy == "error") {
    script.policy = ExhaustionPolicy::Error;
  } else if (policy == "repeat-last") {
    script.policy = ExhaustionPolicy::RepeatLast;
  } else {
    throw InputError("mock script: unknown policy '" + policy + "'");
  }
  const YAML::Node entries = root["entries"];
  if (!entries || !entries.IsSequence()) throw InputError("mock script: 'entries' must be a list");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const YAML::Node n = entries[i];
    if (!n.IsMap() || !n["stage"] || !n["response"]) {
      throw InputError("mock script: entry " + std::to_string(i) + " needs 'stage' and 'response'");
    }
    MockEntry e;
    e.stage = parse_stage(n["stage"].as<std::string>());
    if (n["match"]) e.match = n["match"].as<std::string>();
    e.response = n["response"].as<std::string>();
    script.entries.push_back(std::move(e));
  }
  return script;
}

MockScript load_mock_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mock script '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mock_script(ss.str());
}

MockBackend::MockBackend(MockScript script)
    : script_(std::move(script)), used_(script_.entries.size(), false), last_(kStages.size()) {}

std::string MockBackend::complete(Stage stage, const std::string& prompt) {
  const std::string digest = prompt_digest(stage, prompt);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < script_.entries.size(); ++i) {
    const MockEntry& e = script_.entries[i];
    if (used_[i] || e.stage != stage) continue;
    if (!e.match.empty() && digest.find(e.match) == std::string::npos) continue;
    used_[i] = true;
    last_[static_cast<std::size_t>(stage)] = i;
    return e.response;
  }
  if (script_.policy == ExhaustionPolicy::RepeatLast) {
    const auto& last = last_[static_cast<std::size_t>(stage)];
    if (last) return script_.entries[*last].response;
  }
  throw BackendError("mock script exhausted for stage '" + std::string(to_string(stage)) + "'");
}

std::unique_ptr<LlmBackend> MockBackend::session() const {
  return std::make_unique<MockBackend>(script_);
}

std::size_t MockBackend::consumed() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), true));
}

void BackendConfig::validate() const {
  if (max_retries < 0) throw InputError("backend max_retries must be >= 0");
  if (!(timeout_seconds > 0)) throw InputError("backend timeout must be positive");
  if (!(requests_per_minute > 0)) throw InputError("backend rate limit must be positive");
  if (temperature < 0) throw InputError("backend temperature must be >= 0");
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::Mock) {
    if (config.mock_script.empty()) throw InputError("mock backend needs a mock script");
    return std::make_unique<MockBackend>(load_mock_script(config.mock_script));
  }
  return make_remote_backend(config);
}

}  // namespace optira
