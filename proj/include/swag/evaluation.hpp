#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swag/backends.hpp"
#include "swag/core.hpp"
#include "swag/prompts.hpp"

namespace swag {

struct ComparisonPair {
  std::string pair_id;
  Story left_story;
  Story right_story;
  std::string method_left;
  std::string method_right;

  /// Both stories must come from the same prompt, and the method labels
  /// must differ.
  void validate() const;
};

struct PositionedPair {
  const ComparisonPair* pair = nullptr;
  /// When set, the right story is presented as Story A.
  bool flip = false;
};

/// Flips exactly floor(n/2) pairs, chosen by a seeded shuffle.
std::vector<PositionedPair> assign_positions(const std::vector<ComparisonPair>& pairs,
                                             std::uint64_t rng_seed);

/// Maps a verdict between presented and left/right order. Swapping twice is
/// the identity; ties are unchanged.
Verdict unshuffle_verdict(Verdict presented, bool flip) noexcept;

struct JudgedResult {
  std::string pair_id;
  std::string presented_a;
  std::string presented_b;
  /// In presented coordinates; nullopt when the judgment had no verdict token
  /// or the judge call failed.
  std::optional<Verdict> verdict;
  std::string raw_judgment;
  /// Backend failure message, empty on success.
  std::string error;
};

struct JudgeOptions {
  int max_tokens = 1024;
  double temperature = 0.0;
  TemplateSet templates = TemplateSet::defaults();
};

/// One judge call with the stories in flip-determined order. An unparseable
/// answer is recorded, not raised; backend errors propagate.
JudgedResult judge_pair(const ComparisonPair& pair, bool flip, Backend& judge,
                        const JudgeOptions& options = {});

enum class DenominatorPolicy { attempted, valid_only };

std::string_view to_string(DenominatorPolicy policy) noexcept;
DenominatorPolicy parse_denominator_policy(std::string_view text);

/// (wins + ties / 2) / denominator, where the denominator counts invalid
/// comparisons only under the attempted policy. NaN when it is zero.
double win_rate(std::size_t wins, std::size_t losses, std::size_t ties, std::size_t invalid,
                DenominatorPolicy policy);

struct EvalSummary {
  std::string method_x;
  std::string method_y;
  std::size_t wins_x = 0;
  std::size_t losses_x = 0;
  std::size_t ties = 0;
  std::size_t invalid = 0;
  DenominatorPolicy policy = DenominatorPolicy::valid_only;
  /// Under `policy`.
  double win_rate_x = 0.0;
  double win_rate_valid = 0.0;
  double win_rate_attempted = 0.0;

  [[nodiscard]] std::size_t attempted() const noexcept {
    return wins_x + losses_x + ties + invalid;
  }
};

/// Maps presented-coordinate verdicts back to methods and tallies them from
/// method_x's side. Throws Error(mixed_opponents) when results involve more
/// than one opponent or do not involve method_x.
EvalSummary aggregate(const std::vector<JudgedResult>& results, const std::string& method_x,
                      DenominatorPolicy policy);

struct TournamentResult {
  EvalSummary summary;
  std::vector<JudgedResult> results;
};

struct TournamentOptions {
  JudgeOptions judge;
  std::size_t concurrency = 4;
  DenominatorPolicy policy = DenominatorPolicy::valid_only;
};

/// assign_positions, judge every pair, aggregate from the left method's side.
/// Failed judge calls count as invalid; throws only when every call failed.
TournamentResult run_tournament(const std::vector<ComparisonPair>& pairs, Backend& judge,
                                std::uint64_t rng_seed, const TournamentOptions& options = {});

/// Markdown table laid out as "<x> vs <y> | Win-Rate (<x>) | <x> | <y> | Tie".
std::string render_markdown_table(const std::vector<EvalSummary>& rows);

}  // namespace swag
