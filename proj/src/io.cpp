#include "swag/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "swag/error.hpp"

namespace swag::io {
namespace {

std::string id_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw Error(Errc::parse_error, "id must be a string or integer");
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw Error(Errc::parse_error, std::string("missing field '") + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::parse_error, std::string("field '") + name + "' has the wrong type");
  }
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

json to_json(const Story& story, bool include_timing) {
  json trace = json::array();
  for (const auto& a : story.state.action_trace) trace.push_back(a.label());
  json backends = {{"story", story.story_backend_id}};
  backends["ad"] = story.ad_backend_id ? json(*story.ad_backend_id) : json(nullptr);

  json j = {{"prompt_id", story.state.prompt.id},
            {"prompt_text", story.state.prompt.text},
            {"paragraphs", story.state.paragraphs},
            {"action_trace", std::move(trace)},
            {"mode", to_string(story.mode)},
            {"run_seed", story.run_seed},
            {"backend_ids", std::move(backends)},
            {"fallback_iterations", story.fallback_iterations}};
  if (include_timing) {
    json timing = json::array();
    for (const auto& t : story.timing) {
      timing.push_back({{"iteration", t.iteration}, {"story_ms", t.story_ms}, {"ad_ms", t.ad_ms}});
    }
    j["timing"] = std::move(timing);
  }
  return j;
}

Story story_from_json(const json& j) {
  Story s;
  s.state.prompt = StoryPrompt::make(id_string(j.at("prompt_id")),
                                     field<std::string>(j, "prompt_text"));
  s.state.paragraphs = field<std::vector<std::string>>(j, "paragraphs");
  if (s.state.paragraphs.empty()) {
    throw Error(Errc::parse_error, "story '" + s.state.prompt.id + "' has no paragraphs");
  }
  for (const auto& label : field<std::vector<std::string>>(j, "action_trace")) {
    s.state.action_trace.push_back(Action::canonicalize(label));
  }
  s.mode = parse_story_mode(field<std::string>(j, "mode"));
  s.run_seed = j.value("run_seed", std::uint64_t{0});
  if (j.contains("backend_ids") && j["backend_ids"].is_object()) {
    const auto& b = j["backend_ids"];
    s.story_backend_id = b.value("story", std::string{});
    if (b.contains("ad") && b["ad"].is_string()) s.ad_backend_id = b["ad"].get<std::string>();
  }
  if (j.contains("fallback_iterations")) {
    s.fallback_iterations = field<std::vector<std::size_t>>(j, "fallback_iterations");
  }
  if (j.contains("timing") && j["timing"].is_array()) {
    for (const auto& t : j["timing"]) {
      s.timing.push_back(StepTiming{t.value("iteration", std::size_t{0}), t.value("story_ms", 0.0),
                                    t.value("ad_ms", 0.0)});
    }
  }
  return s;
}

json to_json(const PreferenceRecord& record) {
  return {{"prompt_id", record.prompt.id},
          {"prompt_text", record.prompt.text},
          {"initial_paragraph", record.initial_paragraph},
          {"options", record.option_set.labels()},
          {"chosen", record.chosen.label()},
          {"rejected", record.rejected.label()},
          {"teacher", record.teacher}};
}

PreferenceRecord preference_from_json(const json& j) {
  PreferenceRecord record{
      StoryPrompt::make(id_string(j.at("prompt_id")), field<std::string>(j, "prompt_text")),
      field<std::string>(j, "initial_paragraph"),
      ActionSpace::from_labels(field<std::vector<std::string>>(j, "options")),
      Action::canonicalize(field<std::string>(j, "chosen")),
      Action::canonicalize(field<std::string>(j, "rejected")),
      j.value("teacher", std::string{})};
  record.validate();
  return record;
}

json to_json(const InitialState& state) {
  return {{"prompt_id", state.prompt.id},
          {"prompt_text", state.prompt.text},
          {"initial_paragraph", state.initial_paragraph},
          {"teacher", state.teacher}};
}

InitialState initial_state_from_json(const json& j) {
  InitialState state{
      StoryPrompt::make(id_string(j.at("prompt_id")), field<std::string>(j, "prompt_text")),
      field<std::string>(j, "initial_paragraph"), j.value("teacher", std::string{})};
  if (state.initial_paragraph.empty()) {
    throw Error(Errc::parse_error, "initial state '" + state.prompt.id + "' has no paragraph");
  }
  return state;
}

json to_json(const JudgedResult& result) {
  json j = {{"pair_id", result.pair_id},
            {"presented_a", result.presented_a},
            {"presented_b", result.presented_b},
            {"verdict", result.verdict ? json(std::string(to_string(*result.verdict))) : json(nullptr)},
            {"valid", result.verdict.has_value()},
            {"raw_judgment", result.raw_judgment}};
  if (!result.error.empty()) j["error"] = result.error;
  return j;
}

json to_json(const EvalSummary& s) {
  return {{"method_x", s.method_x},
          {"method_y", s.method_y},
          {"wins", s.wins_x},
          {"losses", s.losses_x},
          {"ties", s.ties},
          {"invalid", s.invalid},
          {"attempted", s.attempted()},
          {"policy", to_string(s.policy)},
          {"win_rate", s.win_rate_x},
          {"win_rate_valid", s.win_rate_valid},
          {"win_rate_attempted", s.win_rate_attempted}};
}

json to_json(const ItemFailure& failure) {
  json j = {{"prompt_id", failure.prompt_id}, {"reason", failure.reason}};
  if (!failure.raw_output.empty()) j["raw_output"] = failure.raw_output;
  return j;
}

json to_json(const dpo::BatchDiagnostics& d) {
  return {{"count", d.count},
          {"mean_loss", d.mean_loss},
          {"accuracy", d.accuracy},
          {"margin",
           {{"min", d.margin_min},
            {"p25", d.margin_p25},
            {"median", d.margin_median},
            {"p75", d.margin_p75},
            {"max", d.margin_max},
            {"mean", d.margin_mean},
            {"histogram", d.margin_histogram}}}};
}

dpo::PreferenceLogProbs logprobs_from_json(const json& j) {
  dpo::PreferenceLogProbs lp{field<double>(j, "logp_chosen_policy"),
                             field<double>(j, "logp_rejected_policy"),
                             field<double>(j, "logp_chosen_ref"),
                             field<double>(j, "logp_rejected_ref")};
  lp.validate();
  return lp;
}

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (is_blank(line)) continue;
    auto where = path.string() + ":" + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::parse_error, where + ": invalid JSON");
    try {
      fn(line_no, j);
    } catch (const Error& e) {
      throw Error(Errc::parse_error, where + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error, where + ": " + e.what());
    }
  }
}

std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::io_error, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<StoryPrompt> parse_prompts(std::string_view content) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(content)};
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
    }
  }
  bool jsonl = false;
  for (const auto& line : lines) {
    if (is_blank(line)) continue;
    jsonl = line.find_first_not_of(" \t") != std::string::npos &&
            line[line.find_first_not_of(" \t")] == '{';
    break;
  }

  std::vector<StoryPrompt> prompts;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (is_blank(line)) continue;
    const auto where = "prompts line " + std::to_string(i + 1);
    StoryPrompt prompt;
    try {
      if (jsonl) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::parse_error, "invalid JSON");
        prompt = StoryPrompt::make(id_string(j.at("id")), field<std::string>(j, "text"));
      } else {
        prompt = StoryPrompt::make(std::to_string(i + 1), line);
      }
    } catch (const Error& e) {
      throw Error(Errc::parse_error, where + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error, where + ": " + e.what());
    }
    if (!ids.insert(prompt.id).second) {
      throw Error(Errc::parse_error, where + ": duplicate prompt id '" + prompt.id + "'");
    }
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

std::vector<StoryPrompt> load_prompts(const std::filesystem::path& path) {
  return parse_prompts(read_text(path));
}

}  // namespace swag::io
