#include "swag/backends.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "swag/hashing.hpp"

namespace swag {
namespace {

using nlohmann::json;

std::string snippet(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

std::string joined_contents(const GenerationRequest& request) {
  std::string joined;
  for (const auto& m : request.messages) {
    if (!joined.empty()) joined += '\n';
    joined += m.content;
  }
  return joined;
}

std::string expand_reply(const std::string& text, const GenerationRequest& request) {
  constexpr std::string_view kToken = "{fp8}";
  auto pos = text.find(kToken);
  if (pos == std::string::npos) return text;
  const auto fp8 = request_fingerprint(request).substr(0, 8);
  std::string out;
  std::size_t from = 0;
  for (; pos != std::string::npos; pos = text.find(kToken, from)) {
    out.append(text, from, pos - from);
    out += fp8;
    from = pos + kToken.size();
  }
  out.append(text, from);
  return out;
}

}  // namespace

void GenerationRequest::validate() const {
  if (messages.empty()) throw Error(Errc::invalid_argument, "generation request has no messages");
  for (const auto& m : messages) {
    if (m.content.empty()) throw Error(Errc::invalid_argument, "chat message content is empty");
  }
  if (max_tokens <= 0) throw Error(Errc::invalid_argument, "max_tokens must be positive");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(Errc::invalid_argument, "temperature must be within [0, 2]");
  }
}

std::string request_fingerprint(const GenerationRequest& request) {
  std::string material;
  for (const auto& m : request.messages) {
    material += m.content;
    material += '\x1e';
  }
  return sha256_hex(material);
}

// ---------------------------------------------------------------------------

void BackendConfig::validate() const {
  if (base_url.empty()) throw Error(Errc::config_error, "backend base_url is empty");
  if (!(timeout.count() > 0.0)) throw Error(Errc::config_error, "backend timeout must be > 0");
  if (max_retries < 0 || max_retries > 10) {
    throw Error(Errc::config_error, "backend max_retries must be within [0, 10]");
  }
  if (backoff_base.count() < 0.0) throw Error(Errc::config_error, "backoff_base must be >= 0");
  if (max_concurrency < 1 || max_concurrency > 1024) {
    throw Error(Errc::config_error, "backend max_concurrency must be within [1, 1024]");
  }
}

std::chrono::duration<double> backoff_delay(std::chrono::duration<double> base, int attempt,
                                            double unit) {
  const double cap = base.count() * std::ldexp(1.0, attempt);
  return std::chrono::duration<double>(cap * unit);
}

bool is_retryable_status(int status) noexcept { return status == 429 || (status >= 500 && status < 600); }

std::string build_chat_body(const GenerationRequest& request, const std::string& default_model) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body = {{"model", request.model.empty() ? default_model : request.model},
               {"messages", std::move(messages)},
               {"max_tokens", request.max_tokens},
               {"temperature", request.temperature}};
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

std::string parse_chat_response(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::malformed_response, "response is not JSON: " + snippet(body));
  const auto* content = [&]() -> const json* {
    if (!j.is_object() || !j.contains("choices")) return nullptr;
    const auto& choices = j["choices"];
    if (!choices.is_array() || choices.empty() || !choices[0].is_object()) return nullptr;
    const auto& first = choices[0];
    if (!first.contains("message") || !first["message"].is_object()) return nullptr;
    const auto& message = first["message"];
    if (!message.contains("content") || !message["content"].is_string()) return nullptr;
    return &message["content"];
  }();
  if (content == nullptr) {
    throw Error(Errc::malformed_response,
                "missing choices[0].message.content in response: " + snippet(body));
  }
  return content->get<std::string>();
}

struct HttpBackend::Endpoint {
  std::string scheme_host_port;
  std::string path;
  std::string api_key;
};

HttpBackend::HttpBackend(BackendConfig config, Sleeper sleeper, std::uint64_t jitter_seed)
    : config_(std::move(config)),
      endpoint_(std::make_unique<Endpoint>()),
      sleeper_(std::move(sleeper)),
      jitter_(SeedBuilder(jitter_seed).add("http-jitter").seed()),
      slots_(std::max(1, config_.max_concurrency)) {
  config_.validate();
  if (!sleeper_) {
    sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  }

  std::string url = config_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::config_error, "base_url must start with http:// or https://: " + url);
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::config_error, "unsupported URL scheme '" + scheme + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  endpoint_->scheme_host_port = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  endpoint_->path = prefix + "/chat/completions";

  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(Errc::config_error,
                  "environment variable " + config_.api_key_env + " holding the API key is not set");
    }
    endpoint_->api_key = key;
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const { return "http:" + config_.model; }

std::string HttpBackend::generate(const GenerationRequest& request) {
  request.validate();
  const auto body = build_chat_body(request, config_.model);

  httplib::Headers headers;
  if (!endpoint_->api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint_->api_key);
  }

  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  std::string last_failure;
  Errc last_code = Errc::transport_error;

  for (int attempt = 0;; ++attempt) {
    httplib::Result res;
    {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<1024>& slots;
        ~Release() { slots.release(); }
      } release{slots_};
      httplib::Client client(endpoint_->scheme_host_port);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      res = client.Post(endpoint_->path, headers, body, "application/json");
    }

    if (!res) {
      last_code = Errc::transport_error;
      last_failure = "request to " + endpoint_->scheme_host_port + endpoint_->path +
                     " failed: " + httplib::to_string(res.error());
    } else {
      const int status = res->status;
      if (status >= 200 && status < 300) return parse_chat_response(res->body);
      if (status == 401 || status == 403) {
        throw Error(Errc::auth_error, "HTTP " + std::to_string(status) + ": " + snippet(res->body));
      }
      if (!is_retryable_status(status)) {
        throw Error(Errc::http_status, "HTTP " + std::to_string(status) + ": " + snippet(res->body));
      }
      last_code = status == 429 ? Errc::rate_limited : Errc::http_status;
      last_failure = "HTTP " + std::to_string(status) + ": " + snippet(res->body);
    }

    if (attempt >= config_.max_retries) break;
    double unit = 0.0;
    {
      std::lock_guard lock(jitter_mutex_);
      unit = static_cast<double>(jitter_() >> 11) * 0x1.0p-53;
    }
    sleeper_(backoff_delay(config_.backoff_base, attempt, unit));
  }
  throw Error(last_code, last_failure + " (after " + std::to_string(config_.max_retries + 1) +
                             " attempts)");
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(Script script, std::string name)
    : script_(std::move(script)), name_(std::move(name)) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::ordered(std::vector<ScriptedReply> replies,
                                                          std::string name) {
  return std::make_shared<ScriptedBackend>(Ordered{std::move(replies)}, std::move(name));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::ordered(const std::vector<std::string>& replies,
                                                          std::string name) {
  std::vector<ScriptedReply> out;
  out.reserve(replies.size());
  for (const auto& r : replies) out.push_back(ScriptedReply::ok(r));
  return ordered(std::move(out), std::move(name));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::keyed(std::map<std::string, ScriptedReply> replies,
                                                        std::string name) {
  return std::make_shared<ScriptedBackend>(Keyed{std::move(replies)}, std::move(name));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::rules(std::vector<ScriptRule> rules,
                                                        std::optional<ScriptedReply> fallback,
                                                        std::string name) {
  return std::make_shared<ScriptedBackend>(Rules{std::move(rules), std::move(fallback)},
                                           std::move(name));
}

std::string ScriptedBackend::generate(const GenerationRequest& request) {
  request.validate();
  ScriptedReply reply;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    const std::size_t call = cursor_++;

    if (auto* ordered = std::get_if<Ordered>(&script_)) {
      if (call >= ordered->replies.size()) {
        throw Error(Errc::script_exhausted, "script '" + name_ + "' has " +
                                                std::to_string(ordered->replies.size()) +
                                                " replies; call " + std::to_string(call + 1) +
                                                " has none");
      }
      reply = ordered->replies[call];
    } else if (auto* keyed = std::get_if<Keyed>(&script_)) {
      auto fp = request_fingerprint(request);
      auto it = keyed->replies.find(fp);
      if (it == keyed->replies.end()) {
        throw Error(Errc::unknown_fingerprint, "script '" + name_ + "' has no reply for " + fp);
      }
      reply = it->second;
    } else {
      const auto& rules = std::get<Rules>(script_);
      const auto joined = joined_contents(request);
      const ScriptedReply* match = nullptr;
      for (const auto& rule : rules.rules) {
        if (joined.find(rule.contains) != std::string::npos) {
          match = &rule.reply;
          break;
        }
      }
      if (match == nullptr && rules.fallback) match = &*rules.fallback;
      if (match == nullptr) {
        throw Error(Errc::unknown_fingerprint,
                    "script '" + name_ + "' has no rule for " + request_fingerprint(request));
      }
      reply = *match;
    }
  }
  if (reply.failure) {
    throw Error(*reply.failure, "injected failure from script '" + name_ + "'");
  }
  return expand_reply(reply.text, request);
}

std::vector<GenerationRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

}  // namespace swag
