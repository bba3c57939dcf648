#include "bartvs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bartvs {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t step : path) h = mix64(h ^ mix64(step + 0x632be59bd9b4e019ULL));
  return h;
}

Rng Rng::split(std::uint64_t index) const {
  // Child streams hash the parent's first output without consuming it.
  std::mt19937_64 probe = engine_;
  return Rng(derive_seed(probe(), {index}));
}

double Rng::uniform_open() {
  double u;
  do {
    u = unif_(engine_);
  } while (u <= 0.0);
  return u;
}

__extension__ typedef unsigned __int128 u128;

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  // Lemire's nearly-divisionless bounded draw.
  const std::uint64_t range = n;
  u128 m = static_cast<u128>(engine_()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<u128>(engine_()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("Rng::gamma: bad parameters");
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

double Rng::truncated_normal_above(double lower) {
  if (lower <= 0.0) {
    // Acceptance probability is at least one half.
    for (;;) {
      const double z = normal();
      if (z > lower) return z;
    }
  }
  // Exponential proposal with the optimal rate (Robert, 1995).
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(uniform_open()) / rate;
    const double d = z - rate;
    if (std::log(uniform_open()) <= -0.5 * d * d && z > lower) return z;
  }
}

std::size_t Rng::categorical(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: weights sum to zero");
  double u = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Round-off fell past the end; return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

std::vector<double> Rng::dirichlet(std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  // Draw in log space so tiny concentrations do not underflow to exact zeros.
  std::vector<double> logs(alpha.size());
  double max_log = -INFINITY;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    // log Gamma(a) = log Gamma(a + 1) + log(U) / a
    const double a = alpha[i];
    double lg;
    if (a < 1.0) {
      lg = std::log(gamma(a + 1.0)) + std::log(uniform_open()) / a;
    } else {
      lg = std::log(gamma(a));
    }
    logs[i] = lg;
    max_log = std::max(max_log, lg);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = std::exp(logs[i] - max_log);
    total += out[i];
  }
  for (double& v : out) v = std::max(v / total, 1e-300);
  return out;
}

void Rng::shuffle(std::span<double> values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[index(i)]);
  }
}

void Rng::shuffle(std::span<std::size_t> values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[index(i)]);
  }
}

}  // namespace bartvs
