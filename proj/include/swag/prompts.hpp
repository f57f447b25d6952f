#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swag/core.hpp"

namespace swag {

enum class Role { system, user };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class Verdict { a, b, tie };

std::string_view to_string(Verdict verdict) noexcept;

/// Prompt templates with `{placeholder}` slots. Defaults are embedded; any
/// of them can be replaced from a file using the same placeholder names.
struct TemplateSet {
  /// Placeholders: {story_prompt} {story} {actions}
  std::string action_discriminator;
  /// Placeholders: {story_prompt} {story} {action}
  std::string story;
  /// Placeholders: {story_prompt}
  std::string initial;
  /// Continuation without an action clause. Placeholders: {story_prompt} {story}
  std::string continuation;
  /// Judge system prompt; no placeholders.
  std::string judge_system;

  static const TemplateSet& defaults();

  /// Named template hashes (sha256) for run manifests.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> hashes() const;
};

/// Single-pass substitution of `{name}` slots. Text substituted in is never
/// rescanned, and braces that do not name a known slot are kept verbatim.
std::string fill_template(std::string_view tpl,
                          const std::vector<std::pair<std::string_view, std::string_view>>& slots);

std::string render_ad_prompt(const StoryState& state, const ActionSpace& space,
                             const TemplateSet& templates = TemplateSet::defaults());

std::string render_story_prompt(const StoryState& state, const Action& action,
                                const TemplateSet& templates = TemplateSet::defaults());

std::string render_initial_prompt(const StoryPrompt& prompt,
                                  const TemplateSet& templates = TemplateSet::defaults());

std::string render_continuation_prompt(const StoryState& state,
                                       const TemplateSet& templates = TemplateSet::defaults());

std::vector<ChatMessage> render_judge_messages(std::string_view story_a, std::string_view story_b,
                                               const TemplateSet& templates = TemplateSet::defaults());

/// Verdict of the last [[A]] / [[B]] / [[C]] token in the text, or nullopt.
std::optional<Verdict> parse_verdict(std::string_view judge_output);

}  // namespace swag
