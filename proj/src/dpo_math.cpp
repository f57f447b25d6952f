#include "swag/dpo_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "swag/error.hpp"

namespace swag::dpo {
namespace {

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw Error(Errc::non_finite_input, std::string(name) + " is not finite");
  }
}

// Linear interpolation between closest ranks.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

void PreferenceLogProbs::validate() const {
  const std::pair<double, const char*> fields[] = {
      {logp_chosen_policy, "logp_chosen_policy"},
      {logp_rejected_policy, "logp_rejected_policy"},
      {logp_chosen_ref, "logp_chosen_ref"},
      {logp_rejected_ref, "logp_rejected_ref"},
  };
  for (const auto& [value, name] : fields) {
    require_finite(value, name);
    if (value > 0.0) {
      throw Error(Errc::invalid_argument,
                  std::string(name) + " = " + std::to_string(value) + " is not a log-probability");
    }
  }
}

Beta::Beta(double value) : value_(value) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw Error(Errc::invalid_argument, "beta must be a finite positive number");
  }
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double margin(const PreferenceLogProbs& lp, Beta beta) {
  lp.validate();
  return beta.value() * ((lp.logp_chosen_policy - lp.logp_chosen_ref) -
                         (lp.logp_rejected_policy - lp.logp_rejected_ref));
}

double loss(const PreferenceLogProbs& lp, Beta beta) { return softplus(-margin(lp, beta)); }

std::array<double, 4> loss_gradient(const PreferenceLogProbs& lp, Beta beta) {
  // d/dz softplus(-z) = -sigmoid(-z); dz/d(inputs) = beta * (+1, -1, -1, +1).
  const double g = beta.value() * sigmoid(-margin(lp, beta));
  return {-g, g, g, -g};
}

double implicit_reward(double logp_policy, double logp_ref, Beta beta) {
  require_finite(logp_policy, "logp_policy");
  require_finite(logp_ref, "logp_ref");
  return beta.value() * (logp_policy - logp_ref);
}

double preference_accuracy(std::span<const PreferenceLogProbs> batch, Beta beta) {
  if (batch.empty()) throw Error(Errc::empty_batch, "preference accuracy of an empty batch");
  double score = 0.0;
  for (const auto& lp : batch) {
    lp.validate();
    const double chosen = implicit_reward(lp.logp_chosen_policy, lp.logp_chosen_ref, beta);
    const double rejected = implicit_reward(lp.logp_rejected_policy, lp.logp_rejected_ref, beta);
    if (chosen > rejected) {
      score += 1.0;
    } else if (chosen == rejected) {
      score += 0.5;
    }
  }
  return score / static_cast<double>(batch.size());
}

BatchDiagnostics diagnose(std::span<const PreferenceLogProbs> batch, Beta beta,
                          std::size_t histogram_bins) {
  if (batch.empty()) throw Error(Errc::empty_batch, "no log-probability records");
  BatchDiagnostics d;
  d.count = batch.size();

  std::vector<double> margins;
  margins.reserve(batch.size());
  double loss_sum = 0.0;
  for (const auto& lp : batch) {
    const double z = margin(lp, beta);
    margins.push_back(z);
    loss_sum += softplus(-z);
  }
  d.mean_loss = loss_sum / static_cast<double>(d.count);
  d.accuracy = preference_accuracy(batch, beta);
  d.margin_mean = std::accumulate(margins.begin(), margins.end(), 0.0) /
                  static_cast<double>(d.count);

  std::sort(margins.begin(), margins.end());
  d.margin_min = margins.front();
  d.margin_max = margins.back();
  d.margin_p25 = quantile(margins, 0.25);
  d.margin_median = quantile(margins, 0.5);
  d.margin_p75 = quantile(margins, 0.75);

  histogram_bins = std::max<std::size_t>(1, histogram_bins);
  d.margin_histogram.assign(histogram_bins, 0);
  const double width = (d.margin_max - d.margin_min) / static_cast<double>(histogram_bins);
  for (double z : margins) {
    std::size_t bin = 0;
    if (width > 0.0) {
      bin = std::min(histogram_bins - 1,
                     static_cast<std::size_t>((z - d.margin_min) / width));
    }
    ++d.margin_histogram[bin];
  }
  return d;
}

}  // namespace swag::dpo
