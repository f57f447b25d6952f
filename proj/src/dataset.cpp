#include "swag/dataset.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>

#include "swag/parallel.hpp"
#include "swag/prompts.hpp"

namespace swag {
namespace {

std::string trim(const std::string& text) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t begin = 0;
  while (begin < text.size() && is_space(text[begin])) ++begin;
  std::size_t end = text.size();
  while (end > begin && is_space(text[end - 1])) --end;
  return text.substr(begin, end - begin);
}

GenerationRequest single_turn(std::string content, const PreferenceOptions& options) {
  GenerationRequest req;
  req.messages.push_back(ChatMessage{Role::user, std::move(content)});
  req.max_tokens = options.max_tokens;
  req.temperature = options.temperature;
  return req;
}

}  // namespace

InitialStatesResult build_initial_states(const std::vector<StoryPrompt>& prompts, Backend& teacher,
                                         const PreferenceOptions& options) {
  std::set<std::string> ids;
  for (const auto& p : prompts) {
    if (!ids.insert(p.id).second) {
      throw Error(Errc::invalid_argument, "duplicate prompt id '" + p.id + "'");
    }
  }

  std::vector<std::optional<InitialState>> states(prompts.size());
  std::vector<std::optional<ItemFailure>> failures(prompts.size());
  const auto teacher_id = teacher.id();
  parallel_for(prompts.size(), options.concurrency, [&](std::size_t i) {
    const auto& prompt = prompts[i];
    try {
      auto paragraph = trim(teacher.generate(
          single_turn(render_initial_prompt(prompt, options.templates), options)));
      if (paragraph.empty()) throw Error(Errc::malformed_response, "teacher returned empty text");
      states[i] = InitialState{prompt, std::move(paragraph), teacher_id};
    } catch (const Error& e) {
      failures[i] = ItemFailure{prompt.id, e.what(), {}};
    }
  });

  InitialStatesResult out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (states[i]) out.states.push_back(std::move(*states[i]));
    if (failures[i]) out.failures.push_back(std::move(*failures[i]));
  }
  return out;
}

Action draw_rejected_action(const ActionSpace& space, const Action& chosen,
                            std::uint64_t rng_seed, std::string_view prompt_id) {
  std::vector<const Action*> remaining;
  remaining.reserve(space.size());
  for (const auto& a : space.actions()) {
    if (a != chosen) remaining.push_back(&a);
  }
  if (remaining.empty()) {
    throw Error(Errc::precondition_violation, "no action left to reject besides '" +
                                                  chosen.label() + "'");
  }
  auto engine = SeedBuilder(rng_seed).add(prompt_id).add("rejected").engine();
  return *remaining[uniform_index(engine, remaining.size())];
}

PreferenceRecord generate_preference_record(const InitialState& state, const ActionSpace& space,
                                            Backend& teacher, std::uint64_t rng_seed,
                                            const PreferenceOptions& options) {
  const StoryState story{state.prompt, {state.initial_paragraph}, {}};
  const auto request = single_turn(render_ad_prompt(story, space, options.templates), options);

  std::string raw;
  for (std::size_t attempt = 0; attempt <= options.max_action_retries; ++attempt) {
    raw = teacher.generate(request);
    if (auto chosen = resolve_action(raw, space)) {
      PreferenceRecord record{state.prompt,
                              state.initial_paragraph,
                              space,
                              *chosen,
                              draw_rejected_action(space, *chosen, rng_seed, state.prompt.id),
                              teacher.id()};
      record.validate();
      return record;
    }
  }
  throw UnresolvedOutputError(state.prompt.id, raw);
}

PreferenceBatch generate_preferences(const std::vector<InitialState>& states,
                                     const ActionSpace& space, Backend& teacher,
                                     std::uint64_t rng_seed, const PreferenceOptions& options) {
  std::vector<std::optional<PreferenceRecord>> records(states.size());
  std::vector<std::optional<ItemFailure>> skipped(states.size());
  parallel_for(states.size(), options.concurrency, [&](std::size_t i) {
    const auto& id = states[i].prompt.id;
    try {
      records[i] = generate_preference_record(states[i], space, teacher, rng_seed, options);
    } catch (const UnresolvedOutputError& e) {
      skipped[i] = ItemFailure{id, e.what(), e.raw_output()};
    } catch (const Error& e) {
      skipped[i] = ItemFailure{id, e.what(), {}};
    }
  });

  PreferenceBatch out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (records[i]) out.records.push_back(std::move(*records[i]));
    if (skipped[i]) out.skipped.push_back(std::move(*skipped[i]));
  }
  return out;
}

std::vector<std::pair<std::string, std::size_t>> ActionHistogram::sorted(
    std::size_t threshold) const {
  std::vector<std::pair<std::string, std::size_t>> rows;
  for (const auto& [label, count] : counts) {
    if (count >= threshold) rows.emplace_back(label, count);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return rows;
}

std::string ActionHistogram::to_tsv(std::size_t threshold) const {
  std::ostringstream out;
  for (const auto& [label, count] : sorted(threshold)) out << label << '\t' << count << '\n';
  return out.str();
}

ActionHistogram action_histogram(const std::vector<PreferenceRecord>& records) {
  ActionHistogram hist;
  for (const auto& r : records) ++hist.counts[r.chosen.label()];
  hist.total = records.size();
  return hist;
}

RebalanceResult rebalance(const std::vector<PreferenceRecord>& original, const Action& dominant,
                          const std::vector<InitialState>& states, Backend& teacher,
                          std::size_t merge_sample, std::uint64_t rng_seed,
                          const ActionSpace& space, const PreferenceOptions& options) {
  if (!space.contains(dominant)) {
    throw Error(Errc::invalid_argument,
                "dominant action '" + dominant.label() + "' is not in the action space");
  }
  std::vector<std::size_t> dominant_rows;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (original[i].chosen == dominant) dominant_rows.push_back(i);
  }
  if (dominant_rows.size() < merge_sample) {
    throw Error(Errc::insufficient_dominant_records,
                "merge sample of " + std::to_string(merge_sample) + " requested but only " +
                    std::to_string(dominant_rows.size()) + " records chose '" + dominant.label() +
                    "'");
  }

  auto batch = generate_preferences(states, space.without(dominant), teacher, rng_seed, options);

  auto engine = SeedBuilder(rng_seed).add("rebalance-merge").engine();
  seeded_shuffle(dominant_rows, engine);
  dominant_rows.resize(merge_sample);
  std::sort(dominant_rows.begin(), dominant_rows.end());

  RebalanceResult out;
  out.regenerated = batch.records.size();
  out.merged = merge_sample;
  out.skipped = std::move(batch.skipped);
  out.records = std::move(batch.records);
  out.records.reserve(out.records.size() + merge_sample);
  for (auto i : dominant_rows) out.records.push_back(original[i]);
  return out;
}

}  // namespace swag
