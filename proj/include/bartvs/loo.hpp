#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/sampler.hpp"

namespace bartvs {

struct LooResult {
  double elpd_loo = 0.0;
  std::vector<double> pointwise;
  /// Tail-shape diagnostic per observation; NaN when smoothing was skipped.
  std::vector<double> pareto_k;
  /// Monte Carlo standard error of each pointwise term and of the total.
  std::vector<double> pointwise_se;
  double mc_se = 0.0;
};

struct PsisResult {
  /// Self-normalized weights, same order as the input.
  std::vector<double> weights;
  /// NaN when the ratios carry no tail to fit.
  double pareto_k = 0.0;
};

struct GeneralizedPareto {
  double k = 0.0;
  double sigma = 1.0;
  double quantile(double prob) const;
};

/// Profile-likelihood fit of a generalized Pareto to positive exceedances,
/// with a weak prior pulling the shape toward 0.5. `x` must be sorted ascending.
GeneralizedPareto fit_generalized_pareto(std::span<const double> sorted_x);

/// Number of tail draws smoothed out of `num_draws`.
std::size_t psis_tail_length(std::size_t num_draws);

/// Pareto-smoothed importance weights from log ratios. Fewer than 5 ratios
/// get plain self-normalized weights.
PsisResult psis_smooth(std::span<const double> log_ratios);

/// Relative efficiency of an MCMC series (effective size / length), from
/// Geyer's initial positive sequence; clamped to (0, 1].
double relative_efficiency(std::span<const double> series);

/// PSIS-LOO from a log-likelihood table indexed [draw][observation].
LooResult loo_from_log_lik(const std::vector<std::vector<double>>& log_lik);

struct LooOptions {
  /// Replaces every draw's sigma (Gaussian only).
  std::optional<double> sigma_override;
};

/// Chain must keep trees or per-draw training fits.
LooResult elpd_loo_gaussian(const Chain& chain, const Dataset& data, const LooOptions& opts = {});
LooResult elpd_loo_bernoulli(const Chain& chain, const Dataset& data);
/// Dispatches on the chain's response kind.
LooResult elpd_loo(const Chain& chain, const Dataset& data);

/// Gaussian and Bernoulli per-draw log-likelihood tables, [draw][observation].
std::vector<std::vector<double>> gaussian_log_lik(const Chain& chain, const Dataset& data,
                                                  std::optional<double> sigma_override = {});
std::vector<std::vector<double>> bernoulli_log_lik(const Chain& chain, const Dataset& data);

/// Refits the model n times, each time predicting the held-out observation.
/// Refuses n < 2 or n > max_n.
LooResult exact_loo_oracle(const Dataset& data, const SamplerConfig& cfg, std::size_t max_n = 50);

}  // namespace bartvs
