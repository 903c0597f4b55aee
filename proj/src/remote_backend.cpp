#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include "optira/error.hpp"
#include "optira/llm.hpp"

namespace optira {

namespace {

std::atomic<std::size_t> g_network_calls{0};

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw InputError("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class RateLimiter {
 public:
  explicit RateLimiter(double per_minute)
      : interval_(std::chrono::duration<double>(60.0 / per_minute)) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    const auto slot = std::max(now, next_);
    next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval_);
    lock.unlock();
    std::this_thread::sleep_until(slot);
  }

 private:
  std::chrono::duration<double> interval_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

class RemoteBackend : public LlmBackend {
 public:
  RemoteBackend(BackendConfig config, std::string key, std::shared_ptr<RateLimiter> limiter)
      : config_(std::move(config)), key_(std::move(key)), limiter_(std::move(limiter)) {}

  std::string complete(Stage stage, const std::string& prompt) override {
    const Endpoint ep = split_url(config_.endpoint);
    nlohmann::json body{{"model", config_.model},
                        {"temperature", config_.temperature},
                        {"messages", {{{"role", "user"}, {"content", prompt}}}}};
    std::mt19937 jitter_rng(std::random_device{}());
    std::uniform_real_distribution<double> jitter(0.0, 0.25);
    double backoff = 1.0;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff + jitter(jitter_rng)));
        backoff *= 2.0;
      }
      limiter_->acquire();
      httplib::Client client(ep.origin);
      const auto seconds = static_cast<time_t>(config_.timeout_seconds);
      client.set_connection_timeout(seconds, 0);
      client.set_read_timeout(seconds, 0);
      client.set_write_timeout(seconds, 0);
      ++g_network_calls;
      auto res = client.Post(ep.path, {{"Authorization", "Bearer " + key_}}, body.dump(),
                             "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw BackendError("stage " + std::string(to_string(stage)) + ": HTTP " +
                           std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
      try {
        const auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed chat-completion reply: ") + e.what());
      }
    }
    throw BackendError("stage " + std::string(to_string(stage)) + ": retries exhausted (" +
                       last_error + ")");
  }

  std::unique_ptr<LlmBackend> session() const override {
    return std::make_unique<RemoteBackend>(config_, key_, limiter_);
  }

  std::string name() const override { return "remote:" + config_.model; }

 private:
  BackendConfig config_;
  std::string key_;
  std::shared_ptr<RateLimiter> limiter_;
};

}  // namespace

std::size_t network_calls() { return g_network_calls.load(); }

std::unique_ptr<LlmBackend> make_remote_backend(const BackendConfig& config) {
  config.validate();
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw BackendError("missing API key: environment variable " + config.api_key_env + " is not set");
  }
  split_url(config.endpoint);
  return std::make_unique<RemoteBackend>(config, key,
                                         std::make_shared<RateLimiter>(config.requests_per_minute));
}

}  // namespace optira
