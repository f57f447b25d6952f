#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swag/backends.hpp"
#include "swag/dataset.hpp"
#include "swag/evaluation.hpp"
#include "swag/swag_loop.hpp"

namespace swag::cli {

using nlohmann::json;

struct BackendSpec {
  std::string role;
  /// "http" or "scripted".
  std::string type;
  BackendConfig http;
  json script;
  /// Script file path, or "inline".
  std::string script_source;
};

/// Everything a command needs, resolved from defaults, then the environment
/// (SWAG_SEED, SWAG_CONCURRENCY), then the config file. Command-line flags are
/// applied on top by each command.
struct AppConfig {
  std::optional<std::filesystem::path> path;
  std::uint64_t seed = 0;
  std::size_t concurrency = 4;
  LoopConfig loop;
  PreferenceOptions preferences;
  JudgeOptions judge;
  DenominatorPolicy policy = DenominatorPolicy::valid_only;
  double beta = 0.1;
  std::optional<std::filesystem::path> actions_file;
  std::map<std::string, std::filesystem::path> template_files;
  std::map<std::string, BackendSpec> backends;

  /// Throws Error(config_error) naming the missing `backends.<role>` entry.
  [[nodiscard]] const BackendSpec& backend(const std::string& role) const;
};

/// `explicit_path` (from --config) wins over SWAG_CONFIG.
AppConfig load_config(const std::optional<std::filesystem::path>& explicit_path);

/// Re-reads the action space and templates after flags changed their sources.
void resolve_resources(AppConfig& config);

BackendPtr make_backend(const BackendSpec& spec, std::uint64_t seed);

/// Script formats:
///   {"mode": "ordered", "replies": [<reply>...]}
///   {"mode": "keyed",   "replies": {"<fingerprint>": <reply>}}
///   {"mode": "rules",   "rules": [{"contains": "...", <reply fields>}], "fallback": <reply>}
/// where <reply> is a string or {"reply": "..."} or {"error": "<ErrorName>"}.
std::shared_ptr<ScriptedBackend> scripted_from_json(const json& script, std::string name);

/// Manifest-safe description: key variable names only, never key values.
json describe(const BackendSpec& spec);

}  // namespace swag::cli
