#include "swag/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "swag/parallel.hpp"
#include "swag/random.hpp"

namespace swag {
namespace {

std::string percent(double rate) {
  if (std::isnan(rate)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", rate * 100.0);
  return buf;
}

}  // namespace

void ComparisonPair::validate() const {
  if (left_story.state.prompt.id != right_story.state.prompt.id) {
    throw Error(Errc::invalid_argument, "pair '" + pair_id + "' compares stories for prompts '" +
                                            left_story.state.prompt.id + "' and '" +
                                            right_story.state.prompt.id + "'");
  }
  if (method_left == method_right) {
    throw Error(Errc::invalid_argument,
                "pair '" + pair_id + "' uses method '" + method_left + "' on both sides");
  }
}

std::vector<PositionedPair> assign_positions(const std::vector<ComparisonPair>& pairs,
                                             std::uint64_t rng_seed) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto engine = SeedBuilder(rng_seed).add("positions").engine();
  seeded_shuffle(order, engine);

  std::vector<PositionedPair> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i].pair = &pairs[i];
  for (std::size_t i = 0; i < pairs.size() / 2; ++i) out[order[i]].flip = true;
  return out;
}

Verdict unshuffle_verdict(Verdict presented, bool flip) noexcept {
  if (!flip || presented == Verdict::tie) return presented;
  return presented == Verdict::a ? Verdict::b : Verdict::a;
}

JudgedResult judge_pair(const ComparisonPair& pair, bool flip, Backend& judge,
                        const JudgeOptions& options) {
  pair.validate();
  const Story& a = flip ? pair.right_story : pair.left_story;
  const Story& b = flip ? pair.left_story : pair.right_story;

  GenerationRequest request;
  request.messages = render_judge_messages(a.text(), b.text(), options.templates);
  request.max_tokens = options.max_tokens;
  request.temperature = options.temperature;

  JudgedResult result;
  result.pair_id = pair.pair_id;
  result.presented_a = flip ? pair.method_right : pair.method_left;
  result.presented_b = flip ? pair.method_left : pair.method_right;
  result.raw_judgment = judge.generate(request);
  result.verdict = parse_verdict(result.raw_judgment);
  return result;
}

std::string_view to_string(DenominatorPolicy policy) noexcept {
  return policy == DenominatorPolicy::attempted ? "attempted" : "valid_only";
}

DenominatorPolicy parse_denominator_policy(std::string_view text) {
  if (text == "attempted") return DenominatorPolicy::attempted;
  if (text == "valid_only" || text == "valid-only") return DenominatorPolicy::valid_only;
  throw Error(Errc::invalid_argument, "unknown denominator policy '" + std::string(text) + "'");
}

double win_rate(std::size_t wins, std::size_t losses, std::size_t ties, std::size_t invalid,
                DenominatorPolicy policy) {
  std::size_t denominator = wins + losses + ties;
  if (policy == DenominatorPolicy::attempted) denominator += invalid;
  if (denominator == 0) return std::numeric_limits<double>::quiet_NaN();
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
         static_cast<double>(denominator);
}

EvalSummary aggregate(const std::vector<JudgedResult>& results, const std::string& method_x,
                      DenominatorPolicy policy) {
  EvalSummary s;
  s.method_x = method_x;
  s.policy = policy;
  for (const auto& r : results) {
    std::string opponent;
    if (r.presented_a == method_x && r.presented_b != method_x) {
      opponent = r.presented_b;
    } else if (r.presented_b == method_x && r.presented_a != method_x) {
      opponent = r.presented_a;
    } else {
      throw Error(Errc::mixed_opponents, "result '" + r.pair_id + "' (" + r.presented_a + " vs " +
                                             r.presented_b + ") does not pit '" + method_x +
                                             "' against another method");
    }
    if (s.method_y.empty()) {
      s.method_y = opponent;
    } else if (s.method_y != opponent) {
      throw Error(Errc::mixed_opponents, "results mix opponents '" + s.method_y + "' and '" +
                                             opponent + "'");
    }

    if (!r.verdict) {
      ++s.invalid;
    } else if (*r.verdict == Verdict::tie) {
      ++s.ties;
    } else {
      const auto& winner = *r.verdict == Verdict::a ? r.presented_a : r.presented_b;
      ++(winner == method_x ? s.wins_x : s.losses_x);
    }
  }
  s.win_rate_valid = win_rate(s.wins_x, s.losses_x, s.ties, s.invalid, DenominatorPolicy::valid_only);
  s.win_rate_attempted =
      win_rate(s.wins_x, s.losses_x, s.ties, s.invalid, DenominatorPolicy::attempted);
  s.win_rate_x = policy == DenominatorPolicy::attempted ? s.win_rate_attempted : s.win_rate_valid;
  return s;
}

TournamentResult run_tournament(const std::vector<ComparisonPair>& pairs, Backend& judge,
                                std::uint64_t rng_seed, const TournamentOptions& options) {
  if (pairs.empty()) throw Error(Errc::invalid_argument, "tournament has no pairs");
  const auto& x = pairs.front().method_left;
  const auto& y = pairs.front().method_right;
  for (const auto& p : pairs) {
    p.validate();
    const bool same = (p.method_left == x && p.method_right == y) ||
                      (p.method_left == y && p.method_right == x);
    if (!same) {
      throw Error(Errc::mixed_opponents, "pair '" + p.pair_id + "' is not a " + x + " vs " + y +
                                             " comparison");
    }
  }

  const auto positions = assign_positions(pairs, rng_seed);
  std::vector<JudgedResult> results(pairs.size());
  parallel_for(pairs.size(), options.concurrency, [&](std::size_t i) {
    const auto& pp = positions[i];
    try {
      results[i] = judge_pair(*pp.pair, pp.flip, judge, options.judge);
    } catch (const Error& e) {
      auto& r = results[i];
      r.pair_id = pp.pair->pair_id;
      r.presented_a = pp.flip ? pp.pair->method_right : pp.pair->method_left;
      r.presented_b = pp.flip ? pp.pair->method_left : pp.pair->method_right;
      r.error = e.what();
    }
  });

  const bool all_failed = std::all_of(results.begin(), results.end(),
                                      [](const JudgedResult& r) { return !r.error.empty(); });
  if (all_failed) {
    throw Error(Errc::transport_error, "every judge call failed; first error: " + results[0].error);
  }
  return TournamentResult{aggregate(results, x, options.policy), std::move(results)};
}

std::string render_markdown_table(const std::vector<EvalSummary>& rows) {
  std::ostringstream out;
  const EvalSummary* previous = nullptr;
  for (const auto& row : rows) {
    if (previous == nullptr || previous->method_x != row.method_x ||
        previous->method_y != row.method_y) {
      if (previous != nullptr) out << '\n';
      out << "| " << row.method_x << " vs " << row.method_y << " | Win-Rate (" << row.method_x
          << ") | " << row.method_x << " | " << row.method_y << " | Tie | Invalid |\n"
          << "|---|---:|---:|---:|---:|---:|\n";
    }
    out << "| " << row.method_x << " | " << percent(row.win_rate_x) << " | " << row.wins_x
        << " | " << row.losses_x << " | " << row.ties << " | " << row.invalid << " |\n";
    previous = &row;
  }
  return out.str();
}

}  // namespace swag
