#include "swag/swag_loop.hpp"

#include <chrono>
#include <functional>

namespace swag {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string trim(std::string text) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t begin = 0;
  while (begin < text.size() && is_space(text[begin])) ++begin;
  std::size_t end = text.size();
  while (end > begin && is_space(text[end - 1])) --end;
  return text.substr(begin, end - begin);
}

// OpenAI-style endpoints take a signed 64-bit seed.
std::uint64_t request_seed(std::uint64_t run_seed, std::string_view prompt_id, std::size_t iteration,
                           std::string_view role, std::size_t attempt = 0) {
  return SeedBuilder(run_seed).add(prompt_id).add(iteration).add(role).add(attempt).seed() >> 1;
}

class LoopDriver {
 public:
  using ActionChooser = std::function<Action(const StoryState&, std::size_t iteration)>;

  LoopDriver(const StoryPrompt& prompt, Backend& story_backend, const LoopConfig& config,
             std::uint64_t run_seed, StoryMode mode)
      : story_backend_(story_backend), config_(config), run_seed_(run_seed) {
    config_.validate();
    story_.state.prompt = prompt;
    story_.mode = mode;
    story_.run_seed = run_seed;
    story_.story_backend_id = story_backend.id();
  }

  Story& story() { return story_; }

  [[noreturn]] void fail(const Error& cause, std::size_t iteration) const {
    throw LoopError(cause.code(), iteration, story_.state.paragraphs, cause.what());
  }

  GenerationRequest request(std::string prompt_text, std::uint64_t seed) const {
    GenerationRequest req;
    req.messages.push_back(ChatMessage{Role::user, std::move(prompt_text)});
    req.max_tokens = config_.max_tokens;
    req.temperature = config_.temperature;
    req.seed = seed;
    return req;
  }

  void write_paragraph(std::string prompt_text, std::size_t iteration, StepTiming& timing) {
    const auto started = Clock::now();
    std::string paragraph;
    try {
      paragraph = trim(story_backend_.generate(
          request(std::move(prompt_text),
                  request_seed(run_seed_, story_.state.prompt.id, iteration, "story"))));
    } catch (const Error& e) {
      fail(e, iteration);
    }
    timing.story_ms = elapsed_ms(started);
    if (paragraph.empty()) {
      fail(Error(Errc::malformed_response, "story model returned an empty paragraph"), iteration);
    }
    story_.state.paragraphs.push_back(std::move(paragraph));
  }

  /// Opening paragraph, then k (action, paragraph) rounds. With no chooser
  /// the continuation template is used and no actions are recorded.
  Story run(const ActionChooser& choose) {
    auto& state = story_.state;
    for (std::size_t i = 0; i <= config_.k; ++i) {
      StepTiming timing{i, 0.0, 0.0};
      if (i == 0) {
        write_paragraph(render_initial_prompt(state.prompt, config_.templates), i, timing);
      } else if (choose) {
        write_paragraph(render_story_prompt(state, state.action_trace[i - 1], config_.templates), i,
                        timing);
      } else {
        write_paragraph(render_continuation_prompt(state, config_.templates), i, timing);
      }

      const bool last = i == config_.k;
      if (choose && !(last && config_.skip_final_action)) {
        const auto started = Clock::now();
        state.action_trace.push_back(choose(state, i));
        timing.ad_ms = elapsed_ms(started);
      }
      story_.timing.push_back(timing);
    }
    return std::move(story_);
  }

 private:
  Story story_;
  Backend& story_backend_;
  const LoopConfig& config_;
  std::uint64_t run_seed_;
};

}  // namespace

std::string_view to_string(UnresolvedPolicy policy) noexcept {
  return policy == UnresolvedPolicy::fail ? "fail" : "fallback_random";
}

UnresolvedPolicy parse_unresolved_policy(std::string_view text) {
  if (text == "fail") return UnresolvedPolicy::fail;
  if (text == "fallback_random" || text == "fallback-random") return UnresolvedPolicy::fallback_random;
  throw Error(Errc::invalid_argument, "unknown unresolved-action policy '" + std::string(text) + "'");
}

void LoopConfig::validate() const {
  if (k > max_k) {
    throw Error(Errc::invalid_argument,
                "k = " + std::to_string(k) + " exceeds the limit of " + std::to_string(max_k));
  }
  if (max_tokens <= 0) throw Error(Errc::invalid_argument, "max_tokens must be positive");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(Errc::invalid_argument, "temperature must be within [0, 2]");
  }
}

LoopError::LoopError(Errc code, std::size_t iteration, std::vector<std::string> partial,
                     const std::string& detail)
    : Error(code, "iteration " + std::to_string(iteration) + ": " + detail),
      iteration_(iteration),
      partial_(std::move(partial)) {}

Engine action_engine(std::uint64_t run_seed, std::string_view prompt_id, std::size_t iteration) {
  return SeedBuilder(run_seed).add(prompt_id).add(iteration).add("action").engine();
}

Action draw_random_action(const ActionSpace& space, std::uint64_t run_seed,
                          std::string_view prompt_id, std::size_t iteration) {
  auto engine = action_engine(run_seed, prompt_id, iteration);
  return space.actions()[uniform_index(engine, space.size())];
}

Story run_swag(const StoryPrompt& prompt, Backend& story_backend, Backend& ad_backend,
               const LoopConfig& config, std::uint64_t run_seed) {
  LoopDriver driver(prompt, story_backend, config, run_seed, StoryMode::swag);
  driver.story().ad_backend_id = ad_backend.id();

  auto choose = [&](const StoryState& state, std::size_t i) -> Action {
    const auto text = render_ad_prompt(state, config.action_space, config.templates);
    for (std::size_t attempt = 0; attempt <= config.max_action_retries; ++attempt) {
      std::string raw;
      try {
        raw = ad_backend.generate(
            driver.request(text, request_seed(run_seed, prompt.id, i, "ad", attempt)));
      } catch (const Error& e) {
        driver.fail(e, i);
      }
      if (auto action = resolve_action(raw, config.action_space)) return *action;
    }
    if (config.on_unresolved == UnresolvedPolicy::fail) {
      driver.fail(Error(Errc::unresolved_action,
                        "no discriminator answer matched the action space after " +
                            std::to_string(config.max_action_retries + 1) + " attempts"),
                  i);
    }
    driver.story().fallback_iterations.push_back(i);
    return draw_random_action(config.action_space, run_seed, prompt.id, i);
  };
  return driver.run(choose);
}

Story run_e2e(const StoryPrompt& prompt, Backend& story_backend, const LoopConfig& config,
              std::uint64_t run_seed) {
  LoopDriver driver(prompt, story_backend, config, run_seed, StoryMode::e2e);
  return driver.run({});
}

Story run_random_ad(const StoryPrompt& prompt, Backend& story_backend, const LoopConfig& config,
                    std::uint64_t run_seed) {
  LoopDriver driver(prompt, story_backend, config, run_seed, StoryMode::random_ad);
  auto choose = [&](const StoryState&, std::size_t i) {
    return draw_random_action(config.action_space, run_seed, prompt.id, i);
  };
  return driver.run(choose);
}

}  // namespace swag
