#include "cli/config.hpp"

#include <cstdlib>

#include "swag/io.hpp"

namespace swag::cli {
namespace {

std::optional<std::string> env(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    auto value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(Errc::config_error, what + " must be a non-negative integer, got '" + text + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::config_error, where + "." + key + " is missing or has the wrong type");
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& target, const std::string& where) {
  if (obj.contains(key)) target = get<T>(obj, key, where);
}

std::filesystem::path relative_to(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

ScriptedReply reply_from_json(const json& j, const std::string& where) {
  if (j.is_string()) return ScriptedReply::ok(j.get<std::string>());
  if (j.is_object() && j.contains("error")) {
    auto name = get<std::string>(j, "error", where);
    auto code = parse_errc(name);
    if (!code) throw Error(Errc::config_error, where + ": unknown error name '" + name + "'");
    return ScriptedReply::fail(*code);
  }
  if (j.is_object() && j.contains("reply")) return ScriptedReply::ok(get<std::string>(j, "reply", where));
  throw Error(Errc::config_error, where + ": a reply is a string, {\"reply\": ...} or {\"error\": ...}");
}

BackendSpec backend_from_json(const std::string& role, const json& j,
                              const std::filesystem::path& base) {
  const std::string where = "backends." + role;
  if (!j.is_object()) throw Error(Errc::config_error, where + " must be an object");
  BackendSpec spec;
  spec.role = role;
  spec.type = j.value("type", std::string("http"));
  if (spec.type == "http") {
    auto& c = spec.http;
    c.base_url = get<std::string>(j, "base_url", where);
    c.model = get<std::string>(j, "model", where);
    maybe(j, "api_key_env", c.api_key_env, where);
    if (j.contains("timeout_s")) c.timeout = std::chrono::duration<double>(get<double>(j, "timeout_s", where));
    maybe(j, "max_retries", c.max_retries, where);
    if (j.contains("backoff_base_s")) {
      c.backoff_base = std::chrono::duration<double>(get<double>(j, "backoff_base_s", where));
    }
    maybe(j, "max_concurrency", c.max_concurrency, where);
    if (j.contains("api_key")) {
      throw Error(Errc::config_error, where + ": put the key in an environment variable and name it "
                                              "with api_key_env; literal keys are not accepted");
    }
    c.validate();
  } else if (spec.type == "scripted") {
    if (!j.contains("script")) throw Error(Errc::config_error, where + ".script is missing");
    const auto& script = j["script"];
    if (script.is_string()) {
      auto path = relative_to(base, script.get<std::string>());
      spec.script_source = path.string();
      spec.script = json::parse(io::read_text(path), nullptr, false);
      if (spec.script.is_discarded()) {
        throw Error(Errc::config_error, where + ": script file " + path.string() + " is not JSON");
      }
    } else {
      spec.script_source = "inline";
      spec.script = script;
    }
    scripted_from_json(spec.script, role);  // validate early
  } else {
    throw Error(Errc::config_error, where + ".type must be \"http\" or \"scripted\"");
  }
  return spec;
}

}  // namespace

const BackendSpec& AppConfig::backend(const std::string& role) const {
  auto it = backends.find(role);
  if (it == backends.end()) {
    throw Error(Errc::config_error, "missing required config field backends." + role);
  }
  return it->second;
}

std::shared_ptr<ScriptedBackend> scripted_from_json(const json& script, std::string name) {
  if (!script.is_object()) throw Error(Errc::config_error, "script must be a JSON object");
  const auto mode = script.value("mode", std::string("ordered"));
  const std::string where = "script '" + name + "'";
  if (mode == "ordered") {
    std::vector<ScriptedReply> replies;
    for (const auto& r : get<json>(script, "replies", where)) replies.push_back(reply_from_json(r, where));
    return ScriptedBackend::ordered(std::move(replies), std::move(name));
  }
  if (mode == "keyed") {
    std::map<std::string, ScriptedReply> replies;
    const auto table = get<json>(script, "replies", where);
    if (!table.is_object()) throw Error(Errc::config_error, where + ".replies must be an object");
    for (const auto& [fp, r] : table.items()) replies.emplace(fp, reply_from_json(r, where));
    return ScriptedBackend::keyed(std::move(replies), std::move(name));
  }
  if (mode == "rules") {
    std::vector<ScriptRule> rules;
    if (script.contains("rules")) {
      for (const auto& r : script["rules"]) {
        rules.push_back(ScriptRule{get<std::string>(r, "contains", where), reply_from_json(r, where)});
      }
    }
    std::optional<ScriptedReply> fallback;
    if (script.contains("fallback")) fallback = reply_from_json(script["fallback"], where);
    return ScriptedBackend::rules(std::move(rules), std::move(fallback), std::move(name));
  }
  throw Error(Errc::config_error, where + ": unknown mode '" + mode + "'");
}

AppConfig load_config(const std::optional<std::filesystem::path>& explicit_path) {
  AppConfig config;

  if (auto seed = env("SWAG_SEED")) config.seed = parse_u64(*seed, "SWAG_SEED");
  if (auto conc = env("SWAG_CONCURRENCY")) config.concurrency = parse_u64(*conc, "SWAG_CONCURRENCY");

  std::optional<std::filesystem::path> path = explicit_path;
  if (!path) {
    if (auto from_env = env("SWAG_CONFIG")) path = *from_env;
  }
  if (path) {
    config.path = *path;
    json j = json::parse(io::read_text(*path), nullptr, /*allow_exceptions=*/false,
                         /*ignore_comments=*/true);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(Errc::config_error, "config file " + path->string() + " is not a JSON object");
    }
    const auto base = path->parent_path();
    maybe(j, "seed", config.seed, "config");
    maybe(j, "concurrency", config.concurrency, "config");
    if (j.contains("actions_file")) {
      config.actions_file = relative_to(base, get<std::string>(j, "actions_file", "config"));
    }
    if (j.contains("loop")) {
      const auto& l = j["loop"];
      auto& loop = config.loop;
      maybe(l, "k", loop.k, "loop");
      maybe(l, "max_action_retries", loop.max_action_retries, "loop");
      if (l.contains("on_unresolved")) {
        loop.on_unresolved = parse_unresolved_policy(get<std::string>(l, "on_unresolved", "loop"));
      }
      maybe(l, "skip_final_action", loop.skip_final_action, "loop");
      maybe(l, "max_tokens", loop.max_tokens, "loop");
      maybe(l, "temperature", loop.temperature, "loop");
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      maybe(d, "max_action_retries", config.preferences.max_action_retries, "dataset");
      maybe(d, "max_tokens", config.preferences.max_tokens, "dataset");
      maybe(d, "temperature", config.preferences.temperature, "dataset");
    }
    if (j.contains("judge")) {
      const auto& jd = j["judge"];
      maybe(jd, "max_tokens", config.judge.max_tokens, "judge");
      maybe(jd, "temperature", config.judge.temperature, "judge");
      if (jd.contains("policy")) {
        config.policy = parse_denominator_policy(get<std::string>(jd, "policy", "judge"));
      }
    }
    if (j.contains("dpo")) maybe(j["dpo"], "beta", config.beta, "dpo");
    if (j.contains("templates")) {
      for (const auto& [name, value] : j["templates"].items()) {
        config.template_files[name] = relative_to(base, value.get<std::string>());
      }
    }
    if (j.contains("backends")) {
      for (const auto& [role, spec] : j["backends"].items()) {
        config.backends[role] = backend_from_json(role, spec, base);
      }
    }
  }
  resolve_resources(config);
  return config;
}

void resolve_resources(AppConfig& config) {
  if (config.actions_file) config.loop.action_space = ActionSpace::load(*config.actions_file);

  TemplateSet templates = TemplateSet::defaults();
  for (const auto& [name, file] : config.template_files) {
    std::string* slot = nullptr;
    if (name == "action_discriminator") slot = &templates.action_discriminator;
    if (name == "story") slot = &templates.story;
    if (name == "initial") slot = &templates.initial;
    if (name == "continuation") slot = &templates.continuation;
    if (name == "judge_system") slot = &templates.judge_system;
    if (slot == nullptr) throw Error(Errc::config_error, "unknown template name '" + name + "'");
    *slot = io::read_text(file);
  }
  config.loop.templates = templates;
  config.preferences.templates = templates;
  config.judge.templates = templates;
  config.preferences.concurrency = config.concurrency;
}

BackendPtr make_backend(const BackendSpec& spec, std::uint64_t seed) {
  if (spec.type == "scripted") return scripted_from_json(spec.script, spec.role);
  return std::make_shared<HttpBackend>(spec.http, HttpBackend::Sleeper{}, seed);
}

json describe(const BackendSpec& spec) {
  if (spec.type == "scripted") {
    return {{"type", "scripted"},
            {"script", spec.script_source},
            {"mode", spec.script.value("mode", std::string("ordered"))}};
  }
  const auto& c = spec.http;
  return {{"type", "http"},
          {"base_url", c.base_url},
          {"model", c.model},
          {"api_key_env", c.api_key_env},
          {"timeout_s", c.timeout.count()},
          {"max_retries", c.max_retries},
          {"backoff_base_s", c.backoff_base.count()},
          {"max_concurrency", c.max_concurrency}};
}

}  // namespace swag::cli
