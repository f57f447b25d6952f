#include "swag/core.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "swag/error.hpp"
#include "swag/hashing.hpp"

namespace swag {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// ASCII and typographic quote marks, as UTF-8.
constexpr std::array<std::string_view, 7> kQuotes = {
    "\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};

bool strip_prefix(std::string_view& s) {
  if (s.empty()) return false;
  if (is_space(s.front())) {
    s.remove_prefix(1);
    return true;
  }
  for (auto q : kQuotes) {
    if (s.starts_with(q)) {
      s.remove_prefix(q.size());
      return true;
    }
  }
  return false;
}

bool strip_suffix(std::string_view& s) {
  if (s.empty()) return false;
  char back = s.back();
  if (is_space(back) || back == '.' || back == '!' || back == '?') {
    s.remove_suffix(1);
    return true;
  }
  for (auto q : kQuotes) {
    if (s.ends_with(q)) {
      s.remove_suffix(q.size());
      return true;
    }
  }
  return false;
}

std::string trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

constexpr std::array<std::string_view, 30> kDefaultLabels = {
    "add suspense",
    "add action",
    "add comedy",
    "add tragedy",
    "add romance",
    "add mystery",
    "add conflict",
    "add character development",
    "add plot twist",
    "add dialogue",
    "add fantasy elements",
    "add historical context",
    "add science fiction elements",
    "add horror",
    "add magical realism",
    "add philosophical themes",
    "add satire",
    "add foreshadowing",
    "add a flashback",
    "add a dream sequence",
    "add symbolism",
    "add irony",
    "add allegory",
    "add a cliffhanger",
    "add a moral dilemma",
    "add a subplot",
    "add an antagonist",
    "add setting details",
    "add cultural references",
    "add humor",
};

}  // namespace

StoryPrompt StoryPrompt::make(std::string id, std::string text) {
  if (trim(text).empty()) {
    throw Error(Errc::invalid_argument, "story prompt '" + id + "' has empty text");
  }
  return StoryPrompt{std::move(id), std::move(text)};
}

std::string canonical_label(std::string_view raw) {
  std::string_view s = raw;
  for (bool changed = true; changed;) {
    changed = false;
    while (strip_prefix(s)) changed = true;
    while (strip_suffix(s)) changed = true;
  }
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

Action Action::canonicalize(std::string_view raw) {
  auto label = canonical_label(raw);
  if (label.empty()) {
    throw Error(Errc::empty_after_normalization,
                "action text is empty after normalization: '" + std::string(raw) + "'");
  }
  return Action(std::move(label));
}

ActionSpace ActionSpace::from_labels(const std::vector<std::string>& labels) {
  std::vector<Action> actions;
  std::set<std::string> seen;
  for (const auto& raw : labels) {
    auto action = Action::canonicalize(raw);
    if (!seen.insert(action.label()).second) {
      throw Error(Errc::invalid_argument, "duplicate action label '" + action.label() + "'");
    }
    actions.push_back(std::move(action));
  }
  if (actions.size() < 2) {
    throw Error(Errc::invalid_argument, "an action space needs at least 2 actions, got " +
                                            std::to_string(actions.size()));
  }
  return ActionSpace(std::move(actions));
}

const ActionSpace& ActionSpace::default_space() {
  static const ActionSpace space = [] {
    std::vector<std::string> labels(kDefaultLabels.begin(), kDefaultLabels.end());
    return from_labels(labels);
  }();
  return space;
}

ActionSpace ActionSpace::parse(std::string_view text) {
  std::vector<std::string> labels;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    labels.push_back(line);
  }
  return from_labels(labels);
}

ActionSpace ActionSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read action space file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

bool ActionSpace::contains(const Action& action) const {
  return std::find(actions_.begin(), actions_.end(), action) != actions_.end();
}

std::vector<std::string> ActionSpace::labels() const {
  std::vector<std::string> out;
  out.reserve(actions_.size());
  for (const auto& a : actions_) out.push_back(a.label());
  return out;
}

ActionSpace ActionSpace::without(const Action& action) const {
  std::vector<std::string> remaining;
  for (const auto& a : actions_) {
    if (a != action) remaining.push_back(a.label());
  }
  return from_labels(remaining);
}

std::string ActionSpace::hash() const {
  std::string joined;
  for (const auto& a : actions_) {
    joined += a.label();
    joined += '\n';
  }
  return sha256_hex(joined);
}

std::optional<Action> resolve_action(std::string_view raw, const ActionSpace& space) {
  const auto text = canonical_label(raw);
  if (text.empty()) return std::nullopt;
  for (const auto& a : space.actions()) {
    if (a.label() == text) return a;
  }
  const Action* found = nullptr;
  for (const auto& a : space.actions()) {
    if (text.find(a.label()) != std::string::npos) {
      if (found != nullptr) return std::nullopt;
      found = &a;
    }
  }
  if (found == nullptr) return std::nullopt;
  return *found;
}

std::string StoryState::story_text() const {
  std::string out;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += paragraphs[i];
  }
  return out;
}

void PreferenceRecord::validate() const {
  if (chosen == rejected) {
    throw Error(Errc::invalid_argument,
                "chosen and rejected actions are both '" + chosen.label() + "'");
  }
  if (!option_set.contains(chosen) || !option_set.contains(rejected)) {
    throw Error(Errc::invalid_argument, "chosen/rejected action outside the option set for '" +
                                            prompt.id + "'");
  }
}

std::string_view to_string(StoryMode mode) noexcept {
  switch (mode) {
    case StoryMode::swag: return "swag";
    case StoryMode::e2e: return "e2e";
    case StoryMode::random_ad: return "random_ad";
  }
  return "swag";
}

StoryMode parse_story_mode(std::string_view text) {
  if (text == "swag") return StoryMode::swag;
  if (text == "e2e") return StoryMode::e2e;
  if (text == "random_ad" || text == "random-ad") return StoryMode::random_ad;
  throw Error(Errc::invalid_argument, "unknown story mode '" + std::string(text) + "'");
}

}  // namespace swag
