#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace bartvs {

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t z);

/// Deterministic child seed for job `path...` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Seeded generator owned by exactly one chain or job.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Independent generator for sub-job `index`; does not advance this one.
  Rng split(std::uint64_t index) const;

  double uniform() { return unif_(engine_); }
  /// Uniform on (0, 1), never returning exactly 0.
  double uniform_open();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal() { return norm_(engine_); }
  double normal(double mean, double sd) { return mean + sd * norm_(engine_); }
  double gamma(double shape, double scale = 1.0);
  double chi_square(double dof) { return gamma(0.5 * dof, 2.0); }
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal conditioned on z > lower.
  double truncated_normal_above(double lower);

  /// Index drawn with probability proportional to weights.
  std::size_t categorical(std::span<const double> weights);
  /// Entries are floored at 1e-300 so every component stays strictly positive.
  std::vector<double> dirichlet(std::span<const double> alpha);
  void shuffle(std::span<double> values);
  void shuffle(std::span<std::size_t> values);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace bartvs
