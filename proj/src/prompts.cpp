#include "swag/prompts.hpp"

#include <array>

#include "swag/error.hpp"
#include "swag/hashing.hpp"

namespace swag {
namespace {

// The two generation templates keep the original line layout byte for byte,
// including the break inside "Here is the\nstory so far" and the space after
// "{action}.".
constexpr std::string_view kActionDiscriminator =
    "Here is a story prompt: {story_prompt}\n"
    "\n"
    "Here is the\n"
    "story so far: {story}\n"
    "\n"
    "Here is a set of actions: {actions}.\n"
    "\n"
    "Based on the current story, choose the best action for the next paragraph.\n"
    "Only output the action you chose without any quotation marks.";

constexpr std::string_view kStory =
    "Here is a story prompt: {story_prompt}\n"
    "\n"
    "Here is the story so far: {story}\n"
    "\n"
    "Here is an action for the next paragraph of the story: {action}. \n"
    "\n"
    "Write the next paragraph of the story such that it uses the given action.\n"
    "New paragraph:";

constexpr std::string_view kInitial =
    "Here is a story prompt: {story_prompt}\n"
    "\n"
    "Write the opening paragraph of a story based on this prompt. "
    "Write exactly one paragraph.\n"
    "First paragraph:";

constexpr std::string_view kContinuation =
    "Here is a story prompt: {story_prompt}\n"
    "\n"
    "Here is the story so far: {story}\n"
    "\n"
    "Write the next paragraph of the story.\n"
    "New paragraph:";

constexpr std::string_view kJudgeSystem =
    "Please act as an impartial judge and evaluate the quality of the stories generated by two "
    "AI models. The two stories have the same premise. You should choose the stories that are "
    "more engaging and interesting, have better suspense and surprise, and are consistent and "
    "straightforward. Your evaluation should focus on which story is more interesting and "
    "engaging overall and which story created more suspense or surprise while remaining "
    "consistent with the initial story prompt. Do not evaluate the stories based on whether or "
    "not they are complete, have a clear resolution, have a larger scope, have more variety, or "
    "are more unpredictable. Only evaluate them based on the aspects of suspense, surprise, "
    "consistency, and engagement. Begin your evaluation by comparing the two stories and provide "
    "a short explanation. Avoid any position biases and ensure that the order in which the "
    "stories were presented does not influence your decision. Do not allow the length of the "
    "stories to influence your evaluation. Be as objective as possible. After providing your "
    "explanation, output your final verdict by strictly following this format: \"[[A]]\" if "
    "story A is better, \"[[B]]\" if story B is better, and \"[[C]]\" for a tie.";

void require_paragraphs(const StoryState& state) {
  if (state.paragraphs.empty()) {
    throw Error(Errc::precondition_violation,
                "story state for prompt '" + state.prompt.id + "' has no paragraphs");
  }
}

std::string join_labels(const ActionSpace& space) {
  std::string out;
  for (const auto& a : space.actions()) {
    if (!out.empty()) out += ", ";
    out += a.label();
  }
  return out;
}

}  // namespace

std::string_view to_string(Role role) noexcept {
  return role == Role::system ? "system" : "user";
}

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::a: return "A";
    case Verdict::b: return "B";
    case Verdict::tie: return "C";
  }
  return "C";
}

const TemplateSet& TemplateSet::defaults() {
  static const TemplateSet set{std::string(kActionDiscriminator), std::string(kStory),
                               std::string(kInitial), std::string(kContinuation),
                               std::string(kJudgeSystem)};
  return set;
}

std::vector<std::pair<std::string, std::string>> TemplateSet::hashes() const {
  return {{"action_discriminator", sha256_hex(action_discriminator)},
          {"story", sha256_hex(story)},
          {"initial", sha256_hex(initial)},
          {"continuation", sha256_hex(continuation)},
          {"judge_system", sha256_hex(judge_system)}};
}

std::string fill_template(std::string_view tpl,
                          const std::vector<std::pair<std::string_view, std::string_view>>& slots) {
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    auto open = tpl.find('{', pos);
    if (open == std::string_view::npos) break;
    out.append(tpl.substr(pos, open - pos));
    auto close = tpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      pos = open;
      break;
    }
    auto name = tpl.substr(open + 1, close - open - 1);
    const std::string_view* value = nullptr;
    for (const auto& [key, v] : slots) {
      if (key == name) value = &v;
    }
    if (value != nullptr) {
      out.append(*value);
      pos = close + 1;
    } else {
      out.push_back('{');
      pos = open + 1;
    }
  }
  out.append(tpl.substr(pos));
  return out;
}

std::string render_ad_prompt(const StoryState& state, const ActionSpace& space,
                             const TemplateSet& templates) {
  require_paragraphs(state);
  const auto story = state.story_text();
  const auto actions = join_labels(space);
  return fill_template(templates.action_discriminator,
                       {{"story_prompt", state.prompt.text}, {"story", story}, {"actions", actions}});
}

std::string render_story_prompt(const StoryState& state, const Action& action,
                                const TemplateSet& templates) {
  require_paragraphs(state);
  const auto story = state.story_text();
  return fill_template(templates.story, {{"story_prompt", state.prompt.text},
                                         {"story", story},
                                         {"action", action.label()}});
}

std::string render_initial_prompt(const StoryPrompt& prompt, const TemplateSet& templates) {
  return fill_template(templates.initial, {{"story_prompt", prompt.text}});
}

std::string render_continuation_prompt(const StoryState& state, const TemplateSet& templates) {
  require_paragraphs(state);
  const auto story = state.story_text();
  return fill_template(templates.continuation,
                       {{"story_prompt", state.prompt.text}, {"story", story}});
}

std::vector<ChatMessage> render_judge_messages(std::string_view story_a, std::string_view story_b,
                                               const TemplateSet& templates) {
  if (story_a.empty() || story_b.empty()) {
    throw Error(Errc::precondition_violation, "judge input stories must be non-empty");
  }
  std::string user = "Story A:\n";
  user.append(story_a);
  user += "\n\nStory B:\n";
  user.append(story_b);
  return {ChatMessage{Role::system, templates.judge_system}, ChatMessage{Role::user, std::move(user)}};
}

std::optional<Verdict> parse_verdict(std::string_view judge_output) {
  static constexpr std::array<std::pair<std::string_view, Verdict>, 3> kTokens = {
      {{"[[A]]", Verdict::a}, {"[[B]]", Verdict::b}, {"[[C]]", Verdict::tie}}};
  std::optional<Verdict> best;
  std::size_t best_pos = 0;
  for (const auto& [token, verdict] : kTokens) {
    auto pos = judge_output.rfind(token);
    if (pos != std::string_view::npos && (!best || pos > best_pos)) {
      best = verdict;
      best_pos = pos;
    }
  }
  return best;
}

}  // namespace swag
