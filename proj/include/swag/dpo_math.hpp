#pragma once

#include <array>
#include <span>
#include <vector>

namespace swag::dpo {

/// Sequence log-probabilities under the trained policy and the frozen
/// reference (SFT) model for one preference pair.
struct PreferenceLogProbs {
  double logp_chosen_policy = 0.0;
  double logp_rejected_policy = 0.0;
  double logp_chosen_ref = 0.0;
  double logp_rejected_ref = 0.0;

  /// Throws Error(non_finite_input) for NaN/inf and Error(invalid_argument)
  /// for positive values.
  void validate() const;
};

/// Inverse temperature of the implicit reward. Must be > 0.
class Beta {
 public:
  static constexpr double default_value = 0.1;

  Beta() = default;
  explicit Beta(double value);

  [[nodiscard]] double value() const noexcept { return value_; }

 private:
  double value_ = default_value;
};

/// log(1 + e^x) without overflow.
double softplus(double x) noexcept;
/// 1 / (1 + e^-x) without overflow.
double sigmoid(double x) noexcept;

/// z = beta * [(chosen_policy - chosen_ref) - (rejected_policy - rejected_ref)]
double margin(const PreferenceLogProbs& lp, Beta beta);

/// -log sigmoid(z) = softplus(-z).
double loss(const PreferenceLogProbs& lp, Beta beta);

/// Partial derivatives of loss() with respect to
/// {chosen_policy, rejected_policy, chosen_ref, rejected_ref}.
std::array<double, 4> loss_gradient(const PreferenceLogProbs& lp, Beta beta);

/// beta * (logp_policy - logp_ref). The beta * log Z(x) partition term is
/// constant per input and cancels in any pairwise comparison, so it is left out.
double implicit_reward(double logp_policy, double logp_ref, Beta beta);

/// Fraction of pairs whose chosen reward beats the rejected reward, ties
/// counting one half. Throws Error(empty_batch) on empty input.
double preference_accuracy(std::span<const PreferenceLogProbs> batch, Beta beta);

struct BatchDiagnostics {
  std::size_t count = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
  double margin_min = 0.0;
  double margin_p25 = 0.0;
  double margin_median = 0.0;
  double margin_p75 = 0.0;
  double margin_max = 0.0;
  double margin_mean = 0.0;
  /// Equal-width bins spanning [margin_min, margin_max].
  std::vector<std::size_t> margin_histogram;
};

BatchDiagnostics diagnose(std::span<const PreferenceLogProbs> batch, Beta beta,
                          std::size_t histogram_bins = 10);

}  // namespace swag::dpo
