#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "swag/backends.hpp"
#include "swag/core.hpp"
#include "swag/error.hpp"
#include "swag/random.hpp"

namespace swag {

struct InitialState {
  StoryPrompt prompt;
  std::string initial_paragraph;
  std::string teacher;
};

/// A per-item failure kept for audit instead of being dropped.
struct ItemFailure {
  std::string prompt_id;
  std::string reason;
  /// Raw teacher output when the failure was an unresolvable action.
  std::string raw_output;
};

struct InitialStatesResult {
  std::vector<InitialState> states;
  std::vector<ItemFailure> failures;
};

struct PreferenceOptions {
  std::size_t max_action_retries = 2;
  int max_tokens = 1024;
  double temperature = 1.0;
  std::size_t concurrency = 4;
  TemplateSet templates = TemplateSet::defaults();
};

/// One opening paragraph per prompt, in input order. Backend failures are
/// recorded per prompt and do not abort the batch. Prompt ids must be unique.
InitialStatesResult build_initial_states(const std::vector<StoryPrompt>& prompts, Backend& teacher,
                                         const PreferenceOptions& options = {});

/// Teacher output that never resolved to a member of the option set.
class UnresolvedOutputError : public Error {
 public:
  UnresolvedOutputError(std::string prompt_id, std::string raw_output)
      : Error(Errc::no_match, "teacher output for prompt '" + prompt_id +
                                  "' does not name an available action"),
        raw_output_(std::move(raw_output)) {}

  [[nodiscard]] const std::string& raw_output() const noexcept { return raw_output_; }

 private:
  std::string raw_output_;
};

/// The rejected action: a uniform draw from space minus chosen, seeded by
/// (rng_seed, prompt_id).
Action draw_rejected_action(const ActionSpace& space, const Action& chosen,
                            std::uint64_t rng_seed, std::string_view prompt_id);

/// Asks the teacher for the best next action and pairs it with a random
/// rejected action. Throws Error(no_match) carrying the last raw output when
/// the teacher's answer cannot be resolved after the allowed retries.
PreferenceRecord generate_preference_record(const InitialState& state, const ActionSpace& space,
                                            Backend& teacher, std::uint64_t rng_seed,
                                            const PreferenceOptions& options = {});

struct PreferenceBatch {
  std::vector<PreferenceRecord> records;
  std::vector<ItemFailure> skipped;
};

/// generate_preference_record over every state, in input order.
PreferenceBatch generate_preferences(const std::vector<InitialState>& states,
                                     const ActionSpace& space, Backend& teacher,
                                     std::uint64_t rng_seed, const PreferenceOptions& options = {});

struct ActionHistogram {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;

  /// (label, count) pairs by descending count, then label. Entries below
  /// `threshold` are omitted from the view only.
  [[nodiscard]] std::vector<std::pair<std::string, std::size_t>> sorted(
      std::size_t threshold = 0) const;
  /// TSV "label\tcount" lines, sorted as above.
  [[nodiscard]] std::string to_tsv(std::size_t threshold = 0) const;
};

/// Counts of chosen actions.
ActionHistogram action_histogram(const std::vector<PreferenceRecord>& records);

struct RebalanceResult {
  std::vector<PreferenceRecord> records;
  /// Regenerated records come first in `records`; this many of them.
  std::size_t regenerated = 0;
  std::size_t merged = 0;
  std::vector<ItemFailure> skipped;
};

/// Regenerates preferences over `states` with `dominant` removed from the
/// options, then merges back a seeded uniform sample of `merge_sample`
/// original records whose chosen action is `dominant`. Throws
/// Error(insufficient_dominant_records) when too few exist.
RebalanceResult rebalance(const std::vector<PreferenceRecord>& original, const Action& dominant,
                          const std::vector<InitialState>& states, Backend& teacher,
                          std::size_t merge_sample, std::uint64_t rng_seed,
                          const ActionSpace& space = ActionSpace::default_space(),
                          const PreferenceOptions& options = {});

template <typename T>
struct CorpusSplit {
  std::vector<T> sft;
  std::vector<T> dpo;
  std::vector<T> eval;
};

/// Seeded shuffle, then the first sft_n / next dpo_n / next eval_n items.
template <typename T>
CorpusSplit<T> split_corpus(const std::vector<T>& records, std::size_t sft_n, std::size_t dpo_n,
                            std::size_t eval_n, std::uint64_t rng_seed) {
  if (sft_n + dpo_n + eval_n > records.size()) {
    throw Error(Errc::insufficient_records,
                "requested " + std::to_string(sft_n + dpo_n + eval_n) + " records but only " +
                    std::to_string(records.size()) + " available");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto engine = SeedBuilder(rng_seed).add("split").engine();
  seeded_shuffle(order, engine);

  CorpusSplit<T> out;
  auto take = [&](std::vector<T>& dst, std::size_t begin, std::size_t n) {
    dst.reserve(n);
    for (std::size_t i = begin; i < begin + n; ++i) dst.push_back(records[order[i]]);
  };
  take(out.sft, 0, sft_n);
  take(out.dpo, sft_n, dpo_n);
  take(out.eval, sft_n + dpo_n, eval_n);
  return out;
}

}  // namespace swag
