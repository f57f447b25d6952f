#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swag/backends.hpp"
#include "swag/core.hpp"
#include "swag/prompts.hpp"
#include "swag/random.hpp"

namespace swag {

enum class UnresolvedPolicy { fail, fallback_random };

std::string_view to_string(UnresolvedPolicy policy) noexcept;
UnresolvedPolicy parse_unresolved_policy(std::string_view text);

struct LoopConfig {
  std::size_t k = 5;
  ActionSpace action_space = ActionSpace::default_space();
  std::size_t max_action_retries = 2;
  UnresolvedPolicy on_unresolved = UnresolvedPolicy::fallback_random;
  /// Skip the discriminator call after the last paragraph. Off by default, so
  /// the final action is computed and recorded even though nothing uses it.
  bool skip_final_action = false;
  int max_tokens = 1024;
  double temperature = 1.0;
  TemplateSet templates = TemplateSet::defaults();

  static constexpr std::size_t max_k = 1000;

  void validate() const;
};

/// Failure inside a loop. code() is the underlying cause; the iteration and
/// the paragraphs written before the failure are kept for the transcript.
class LoopError : public Error {
 public:
  LoopError(Errc code, std::size_t iteration, std::vector<std::string> partial,
            const std::string& detail);

  [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }
  [[nodiscard]] const std::vector<std::string>& partial_paragraphs() const noexcept {
    return partial_;
  }

 private:
  std::size_t iteration_;
  std::vector<std::string> partial_;
};

/// Seeded engine for the random action at `iteration` of one story.
Engine action_engine(std::uint64_t run_seed, std::string_view prompt_id, std::size_t iteration);

/// Uniform draw from the space using action_engine(run_seed, prompt_id, iteration).
Action draw_random_action(const ActionSpace& space, std::uint64_t run_seed,
                          std::string_view prompt_id, std::size_t iteration);

/// Action-guided generation: opening paragraph, then k rounds of
/// (discriminator picks an action, story model writes a paragraph using it).
Story run_swag(const StoryPrompt& prompt, Backend& story_backend, Backend& ad_backend,
               const LoopConfig& config, std::uint64_t run_seed);

/// Unguided baseline: opening paragraph plus k plain continuations.
Story run_e2e(const StoryPrompt& prompt, Backend& story_backend, const LoopConfig& config,
              std::uint64_t run_seed);

/// run_swag with uniformly random actions in place of the discriminator.
Story run_random_ad(const StoryPrompt& prompt, Backend& story_backend, const LoopConfig& config,
                    std::uint64_t run_seed);

}  // namespace swag
