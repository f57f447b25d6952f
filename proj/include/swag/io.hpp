#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "swag/core.hpp"
#include "swag/dataset.hpp"
#include "swag/dpo_math.hpp"
#include "swag/evaluation.hpp"

namespace swag::io {

using nlohmann::json;

// Record <-> JSON. Field layouts are the on-disk JSONL formats.
json to_json(const Story& story, bool include_timing = true);
Story story_from_json(const json& j);

json to_json(const PreferenceRecord& record);
PreferenceRecord preference_from_json(const json& j);

json to_json(const InitialState& state);
InitialState initial_state_from_json(const json& j);

json to_json(const JudgedResult& result);
json to_json(const EvalSummary& summary);
json to_json(const ItemFailure& failure);
json to_json(const dpo::BatchDiagnostics& diagnostics);

/// Accepts the four log-prob fields plus an optional "id".
dpo::PreferenceLogProbs logprobs_from_json(const json& j);

/// Calls fn(line_number, object) for every non-blank line. A line that is not
/// valid JSON, or that fn rejects by throwing, is reported as
/// Error(parse_error) naming the file and 1-based line number.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& fn);

template <typename T, typename Parse>
std::vector<T> read_jsonl_as(const std::filesystem::path& path, Parse parse) {
  std::vector<T> out;
  read_jsonl(path, [&](std::size_t, const json& j) { out.push_back(parse(j)); });
  return out;
}

/// One compact JSON object per line.
std::string to_jsonl(const std::vector<json>& rows);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// JSONL {id, text} when the first non-blank line starts with '{'; otherwise
/// one prompt per non-blank line with the 1-based line number as id.
/// Duplicate ids are rejected.
std::vector<StoryPrompt> parse_prompts(std::string_view content);
std::vector<StoryPrompt> load_prompts(const std::filesystem::path& path);

}  // namespace swag::io
