#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/rng.hpp"
#include "bartvs/tree.hpp"

namespace bartvs {

/// Dirichlet prior on split-variable probabilities.
struct DartConfig {
  bool enabled = false;
  /// Beta(a, b) prior on theta / (theta + rho).
  double a = 0.5;
  double b = 1.0;
  /// 0 means the number of predictors.
  double rho = 0.0;
  /// Fixes the concentration instead of sampling it.
  std::optional<double> fixed_theta;
  /// First iteration with Dirichlet updates; negative means n_burn / 2.
  int start = -1;
};

/// Data-derived prior settings. Normally computed from the training data;
/// fixing them lets refits on subsets share one prior.
struct PriorCalibration {
  /// Continuous: response centre, range, and s.d. of the rescaled response.
  double center = 0.0;
  double scale = 1.0;
  double sd = 1.0;
  /// Probit: constant added to the sum of trees.
  double offset = 0.0;
  CutpointGrid grid;
};

struct SamplerConfig {
  int num_trees = 200;
  int n_burn = 1000;
  int n_keep = 1000;
  int thin = 1;
  double gamma = 0.95;
  double beta = 2.0;
  double k = 2.0;
  double nu = 3.0;
  double q = 0.90;
  int num_cuts = 100;
  DartConfig dart;
  std::uint64_t seed = 1;
  /// Snapshot the trees of every kept draw (needed for predict).
  bool keep_trees = true;
  /// Store per-draw fitted values on the training rows.
  bool keep_train_fits = false;
  /// Overrides the calibration derived from the training data.
  std::optional<PriorCalibration> calibration;

  /// Throws std::invalid_argument on out-of-range settings.
  void validate() const;
};

struct PosteriorDraw {
  std::vector<Tree> trees;
  /// Error s.d. on the original response scale; 1 for probit.
  double sigma = 1.0;
  std::vector<int> split_counts;
  std::vector<double> accept_sums;
  /// Split-variable probabilities (DART only).
  std::vector<double> split_probs;
  double theta = 0.0;
  int num_internal = 0;
  /// Training-row fit: response scale for continuous, latent scale for probit.
  std::vector<double> train_fit;
};

struct Chain {
  std::vector<PosteriorDraw> draws;
  SamplerConfig config;
  ResponseKind kind = ResponseKind::Continuous;
  /// Continuous responses are modelled as (y - center) / scale.
  double center = 0.0;
  double scale = 1.0;
  /// Probit: constant added to the sum of trees.
  double offset = 0.0;
  std::size_t num_predictors = 0;
  std::vector<PredictorType> types;
  std::vector<std::string> names;
  std::uint64_t fingerprint = 0;
  /// Posterior mean fit on the training rows (same scale as train_fit).
  std::vector<double> train_mean;
  /// BIRTH/DEATH proposals accepted over the whole run.
  std::uint64_t births_accepted = 0;
  std::uint64_t deaths_accepted = 0;

  std::size_t num_draws() const { return draws.size(); }
};

/// Sampler state exposed after each full iteration, for invariant checks.
struct IterationView {
  int iteration = 0;
  /// What the trees are fitted to: rescaled response, or latents minus offset.
  std::span<const double> target;
  std::span<const double> residual;
  std::span<const double> latents;
  double sigma2 = 1.0;
  const std::vector<Tree>* trees = nullptr;
};
using IterationHook = std::function<void(const IterationView&)>;

Chain fit_continuous(const Dataset& data, const SamplerConfig& cfg, const IterationHook& hook = {});
Chain fit_probit(const Dataset& data, const SamplerConfig& cfg, const IterationHook& hook = {});
/// fit_continuous or fit_probit with the Dirichlet split prior switched on.
Chain fit_dart(const Dataset& data, SamplerConfig cfg, const IterationHook& hook = {});
/// Dispatches on the response kind; honours cfg.dart.enabled.
Chain fit(const Dataset& data, const SamplerConfig& cfg, const IterationHook& hook = {});

/// The calibration a fit on `data` would derive.
PriorCalibration calibrate(const Dataset& data, const SamplerConfig& cfg);

struct Prediction {
  /// [draw][row]: response scale, or latent scale for probit.
  std::vector<std::vector<double>> draws;
  std::vector<double> mean;
  /// Probit only: Phi of each draw, and Phi of the posterior mean.
  std::vector<std::vector<double>> prob_draws;
  std::vector<double> prob_of_mean;
  /// Probit only: average of prob_draws over draws.
  std::vector<double> mean_prob;
};

/// Requires a chain with kept trees; throws std::invalid_argument on a
/// predictor-count mismatch.
Prediction predict(const Chain& chain, const Matrix& x);

/// Standard normal CDF clamped strictly inside (0, 1).
double probit_probability(double latent);

/// lambda such that P(sigma < sd) = q under the scaled inverse chi-square prior.
double error_variance_scale(double sd, double nu, double q);
/// sigma^2 | rest = (nu lambda + ssr) / chi^2_{nu + n}
double sample_error_variance(double ssr, std::size_t n, double nu, double lambda, Rng& rng);
/// Conjugate normal draw of a leaf value given its residual count and sum.
double sample_leaf_value(std::size_t count, double sum, double sigma2, double leaf_var, Rng& rng);
/// Grid draw of the Dirichlet concentration given sum_j log s_j.
double sample_dirichlet_concentration(double sum_log_s, std::size_t p, const DartConfig& cfg,
                                      Rng& rng);

}  // namespace bartvs
