#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/rng.hpp"
#include "bartvs/sampler.hpp"
#include "bartvs/selection.hpp"

namespace bartvs {

enum class ScenarioId { CC1, CC2, CM1, CM2, BC1, BC2, BM1, BM2, EX1, EX2 };

const char* to_string(ScenarioId id);
/// Accepts "CC1" or "C.C.1" forms, case-insensitive.
std::optional<ScenarioId> parse_scenario(std::string_view name);
bool has_binary_response(ScenarioId id);

struct ScenarioSpec {
  ScenarioId id = ScenarioId::CC1;
  std::size_t n = 500;
  /// 0 picks the scenario's fixed or customary size.
  std::size_t p = 0;
  double sigma2 = 1.0;
};

/// Fills in p when it is 0 and throws std::invalid_argument when the scenario
/// cannot be generated with the requested sizes.
ScenarioSpec resolve(ScenarioSpec spec);

/// Zero-based indices of the predictors in the scenario's mean function.
std::vector<int> relevant_set(ScenarioId id, std::size_t p);

/// Mean function at one predictor row. For binary-response scenarios this is
/// the latent mean, shifted so that its population average is zero.
double scenario_mean(ScenarioId id, std::span<const double> row);

Dataset gen_scenario(const ScenarioSpec& spec, Rng& rng);

struct SelectionMetrics {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  /// 0 when nothing is selected (see `empty`).
  double precision = 0.0;
  /// 1 when there is nothing relevant to find.
  double recall = 0.0;
  /// 0 when precision + recall = 0.
  double f1 = 0.0;
  bool missed = false;
  bool empty = false;
};

/// Indices are zero-based and must lie in [0, p); duplicates are ignored.
SelectionMetrics selection_metrics(std::span<const int> selected, std::span<const int> relevant, std::size_t p);

struct MethodSpec {
  enum class Family { PermuteVip, PermuteWithinType, PermuteMi, Backward, Dart, Abc };
  std::string label;
  Family family = Family::PermuteVip;
  int num_trees = 20;
  double threshold = 0.5;
};

/// permute-vip | permute-wtvip | permute-mi | backward | dart-<M> | abc-<M>-<threshold>
MethodSpec parse_method(std::string_view label);

struct BenchConfig {
  ScenarioSpec scenario;
  int reps = 1;
  std::vector<std::string> methods;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Burn-in, kept draws, and prior settings; num_trees comes from each method.
  SamplerConfig sampler;
  PermutationOptions permutation;
  BackwardOptions backward;
  AbcOptions abc;
  int backward_trees = 50;
};

struct ReplicationRecord {
  int rep = 0;
  std::string method;
  std::vector<int> selected;
  SelectionMetrics metrics;
  /// Empty on success.
  std::string error;
  std::uint64_t fits = 0;
};

struct MethodSummary {
  std::string method;
  int reps = 0;
  int failures = 0;
  int empty_selections = 0;
  double r_miss = 0.0;
  double r_miss_se = 0.0;
  double recall = 0.0;
  double recall_se = 0.0;
  /// Averaged over replications with a non-empty selection.
  double precision = 0.0;
  double precision_se = 0.0;
  double f1 = 0.0;
  double f1_se = 0.0;
};

struct BenchResult {
  ScenarioSpec scenario;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<MethodSummary> methods;
  std::vector<ReplicationRecord> records;
};

/// Mean and standard error (sample s.d. / sqrt(count)); se is 0 for one value.
std::pair<double, double> mean_and_se(std::span<const double> values);

BenchResult run_benchmark(const BenchConfig& cfg);

}  // namespace bartvs
