#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/importance.hpp"
#include "bartvs/sampler.hpp"

namespace bartvs {

struct BackwardStep {
  /// Predictors of this step's winning model (original indices, ascending).
  std::vector<int> predictors;
  /// Predictor removed to reach this model; -1 for the full model.
  int dropped = -1;
  /// Test MSE, or test mean log loss for a binary response.
  double test_loss = 0.0;
  /// Training-set PSIS-LOO score of the winner.
  double elpd_loo = 0.0;
  double max_pareto_k = 0.0;
};

struct SelectionReport {
  std::string method;
  std::vector<std::string> names;
  std::vector<PredictorType> types;
  std::vector<double> scores;
  std::vector<double> thresholds;
  std::vector<bool> selected;
  std::vector<std::string> warnings;

  // Permutation runs.
  int num_null = 0;
  int num_rep = 0;
  double alpha = 0.0;
  // Backward runs.
  std::vector<BackwardStep> trace;
  int chosen_step = -1;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  // ABC runs.
  std::vector<double> subset_inclusion;
  int abc_iterations = 0;
  int abc_kept = 0;
  double abc_loss_cutoff = 0.0;

  std::uint64_t seed = 0;
  std::uint64_t num_fits = 0;

  std::vector<int> selected_indices() const;
};

struct PermutationOptions {
  int num_null = 100;
  int num_rep = 10;
  double alpha = 0.05;
  int threads = 1;
};

/// Threshold rule: the ceil((1 - alpha) L)-th smallest of L null scores.
double permutation_threshold(std::vector<double> null_scores, double alpha);

/// Null dataset `index` for a permutation run seeded with `seed`: same
/// predictors, shuffled response.
Dataset null_dataset(const Dataset& data, std::uint64_t seed, std::size_t index);

/// One report per requested kind, all computed from the same fits. Repeat
/// fits are aggregated by the mean (median for MI).
std::vector<SelectionReport> permutation_select(const Dataset& data, std::span<const ImportanceKind> kinds,
                                                const PermutationOptions& opts, const SamplerConfig& cfg);
SelectionReport permutation_select(const Dataset& data, ImportanceKind kind, const PermutationOptions& opts,
                                   const SamplerConfig& cfg);

struct BackwardOptions {
  double split = 0.8;
  int threads = 1;
};

/// Returns the winner with the largest training-set LOO score.
SelectionReport backward_select(const Dataset& data, const BackwardOptions& opts, const SamplerConfig& cfg);

/// Median-probability model from a Dirichlet-prior fit: pi_j >= threshold and pi_j > 0.
SelectionReport dart_select(const Dataset& data, const SamplerConfig& cfg, double threshold = 0.5);

struct AbcOptions {
  int iterations = 1000;
  double keep_frac = 0.1;
  double split = 0.5;
  double threshold = 0.5;
  int burn = 200;
  int threads = 1;
};

SelectionReport abc_forest_select(const Dataset& data, const AbcOptions& opts, const SamplerConfig& cfg);

}  // namespace bartvs
