#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <variant>
#include <vector>

#include "swag/error.hpp"
#include "swag/prompts.hpp"
#include "swag/random.hpp"

namespace swag {

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  int max_tokens = 1024;
  double temperature = 1.0;
  std::optional<std::uint64_t> seed;
  /// Empty means "use the backend's configured model".
  std::string model;

  /// Throws Error(invalid_argument) when messages is empty, max_tokens <= 0
  /// or temperature is outside [0, 2].
  void validate() const;
};

/// Stable SHA-256 over the message contents, each followed by a 0x1e record
/// separator so message boundaries are part of the hash.
std::string request_fingerprint(const GenerationRequest& request);

/// Text generation endpoint. Implementations are safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;

  /// Returns the first completion's text. Throws Error on failure.
  virtual std::string generate(const GenerationRequest& request) = 0;

  /// Identifier recorded in outputs, e.g. "http:my-model".
  [[nodiscard]] virtual std::string id() const = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

// ---------------------------------------------------------------------------
// OpenAI-compatible chat completions over HTTP(S).

struct BackendConfig {
  std::string base_url;
  std::string api_key_env;
  std::string model;
  std::chrono::duration<double> timeout{60.0};
  int max_retries = 3;
  std::chrono::duration<double> backoff_base{1.0};
  /// Simultaneous requests allowed through one backend handle.
  int max_concurrency = 4;

  void validate() const;
};

/// Exponential backoff with full jitter: uniform in [0, base * 2^attempt].
/// `unit` is a draw in [0, 1).
std::chrono::duration<double> backoff_delay(std::chrono::duration<double> base, int attempt,
                                            double unit);

/// Statuses worth retrying: 429 and 5xx.
bool is_retryable_status(int status) noexcept;

class HttpBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  /// Reads the API key from the environment variable named in config.
  /// An empty api_key_env means no Authorization header is sent.
  explicit HttpBackend(BackendConfig config, Sleeper sleeper = {}, std::uint64_t jitter_seed = 0);
  ~HttpBackend() override;

  std::string generate(const GenerationRequest& request) override;
  [[nodiscard]] std::string id() const override;

  [[nodiscard]] const BackendConfig& config() const noexcept { return config_; }

 private:
  struct Endpoint;

  BackendConfig config_;
  std::unique_ptr<Endpoint> endpoint_;
  Sleeper sleeper_;
  std::mutex jitter_mutex_;
  Engine jitter_;
  std::counting_semaphore<1024> slots_;
};

/// Request body for {base_url}/chat/completions.
std::string build_chat_body(const GenerationRequest& request, const std::string& default_model);

/// Extracts choices[0].message.content; throws Error(malformed_response).
std::string parse_chat_response(const std::string& body);

// ---------------------------------------------------------------------------
// Deterministic scripted backend for tests and desk runs.

/// One scripted reply: either text or an injected failure.
struct ScriptedReply {
  std::string text;
  std::optional<Errc> failure;

  static ScriptedReply ok(std::string text) { return {std::move(text), std::nullopt}; }
  static ScriptedReply fail(Errc code) { return {{}, code}; }
};

/// First rule whose `contains` substring occurs in the joined message
/// contents wins. The reply text may use {fp8}, which expands to the first 8
/// hex digits of the request fingerprint.
struct ScriptRule {
  std::string contains;
  ScriptedReply reply;
};

class ScriptedBackend final : public Backend {
 public:
  /// Replies handed out in call order; calls past the end throw
  /// Error(script_exhausted).
  static std::shared_ptr<ScriptedBackend> ordered(std::vector<ScriptedReply> replies,
                                                  std::string name = "scripted");
  static std::shared_ptr<ScriptedBackend> ordered(const std::vector<std::string>& replies,
                                                  std::string name = "scripted");
  /// Replies keyed by request_fingerprint; unknown keys throw
  /// Error(unknown_fingerprint).
  static std::shared_ptr<ScriptedBackend> keyed(std::map<std::string, ScriptedReply> replies,
                                                std::string name = "scripted");
  /// Order-independent replies chosen by substring rules. With no matching
  /// rule the fallback is used, or Error(unknown_fingerprint) if there is none.
  static std::shared_ptr<ScriptedBackend> rules(std::vector<ScriptRule> rules,
                                                std::optional<ScriptedReply> fallback,
                                                std::string name = "scripted");

  std::string generate(const GenerationRequest& request) override;
  [[nodiscard]] std::string id() const override { return "scripted:" + name_; }

  /// Every request received, in arrival order.
  [[nodiscard]] std::vector<GenerationRequest> requests() const;
  [[nodiscard]] std::size_t calls() const;

  struct Ordered {
    std::vector<ScriptedReply> replies;
  };
  struct Keyed {
    std::map<std::string, ScriptedReply> replies;
  };
  struct Rules {
    std::vector<ScriptRule> rules;
    std::optional<ScriptedReply> fallback;
  };
  using Script = std::variant<Ordered, Keyed, Rules>;

  ScriptedBackend(Script script, std::string name);

 private:
  Script script_;
  std::string name_;
  mutable std::mutex mutex_;
  std::size_t cursor_ = 0;
  std::vector<GenerationRequest> log_;
};

}  // namespace swag
