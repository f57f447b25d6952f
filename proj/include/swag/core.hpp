#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace swag {

struct StoryPrompt {
  std::string id;
  std::string text;

  /// Throws Error(invalid_argument) when text is blank.
  static StoryPrompt make(std::string id, std::string text);

  friend bool operator==(const StoryPrompt&, const StoryPrompt&) = default;
};

/// A steering phrase such as "add suspense". The label is always in canonical
/// form: lowercase, single-space separated, no surrounding quotes.
class Action {
 public:
  /// Normalizes arbitrary model output. Throws
  /// Error(empty_after_normalization) when nothing remains.
  static Action canonicalize(std::string_view raw);

  [[nodiscard]] const std::string& label() const noexcept { return label_; }

  friend bool operator==(const Action&, const Action&) = default;
  friend auto operator<=>(const Action&, const Action&) = default;

 private:
  explicit Action(std::string label) : label_(std::move(label)) {}
  std::string label_;
};

/// Canonical form of raw text, possibly empty. Idempotent.
std::string canonical_label(std::string_view raw);

/// Ordered, duplicate-free set of actions with at least two members.
class ActionSpace {
 public:
  static ActionSpace from_labels(const std::vector<std::string>& labels);
  /// The 30 built-in steering phrases, in their listed order.
  static const ActionSpace& default_space();
  /// One label per line; blank lines and `#` comments are skipped.
  static ActionSpace load(const std::filesystem::path& path);
  static ActionSpace parse(std::string_view text);

  [[nodiscard]] const std::vector<Action>& actions() const noexcept { return actions_; }
  [[nodiscard]] std::size_t size() const noexcept { return actions_.size(); }
  [[nodiscard]] bool contains(const Action& action) const;
  [[nodiscard]] std::vector<std::string> labels() const;
  /// Copy with `action` removed. Throws if the result would hold < 2 actions.
  [[nodiscard]] ActionSpace without(const Action& action) const;
  /// SHA-256 over the newline-joined labels.
  [[nodiscard]] std::string hash() const;

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  explicit ActionSpace(std::vector<Action> actions) : actions_(std::move(actions)) {}
  std::vector<Action> actions_;
};

/// Matches free-form model output against a space: exact canonical match
/// first, then the unique label contained in the canonical text. Returns
/// nullopt for zero or several candidates.
std::optional<Action> resolve_action(std::string_view raw, const ActionSpace& space);

/// The evolving (prompt, story, action trace) triple of the feedback loop.
struct StoryState {
  StoryPrompt prompt;
  std::vector<std::string> paragraphs;
  std::vector<Action> action_trace;

  /// Paragraphs joined by a blank line.
  [[nodiscard]] std::string story_text() const;
};

struct PreferenceRecord {
  StoryPrompt prompt;
  std::string initial_paragraph;
  ActionSpace option_set;
  Action chosen;
  Action rejected;
  std::string teacher;

  /// Throws Error(invalid_argument) unless chosen != rejected and both are
  /// members of option_set.
  void validate() const;
};

enum class StoryMode { swag, e2e, random_ad };

std::string_view to_string(StoryMode mode) noexcept;
StoryMode parse_story_mode(std::string_view text);

struct StepTiming {
  std::size_t iteration = 0;
  double story_ms = 0.0;
  double ad_ms = 0.0;
};

struct Story {
  StoryState state;
  StoryMode mode = StoryMode::swag;
  std::uint64_t run_seed = 0;
  std::string story_backend_id;
  std::optional<std::string> ad_backend_id;
  /// Iterations whose action came from the random fallback after the
  /// discriminator output could not be resolved.
  std::vector<std::size_t> fallback_iterations;
  std::vector<StepTiming> timing;

  [[nodiscard]] std::string text() const { return state.story_text(); }
};

}  // namespace swag
