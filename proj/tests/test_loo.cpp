#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "bartvs/loo.hpp"
#include "fixtures.hpp"

using namespace bartvs;

namespace {

// Log of draws from a generalized Pareto(k, sigma) by inversion.
std::vector<double> pareto_log_ratios(double k, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(count);
  for (auto& v : out) {
    const double u = rng.uniform_open();
    v = std::log((std::pow(u, -k) - 1.0) / k);
  }
  return out;
}

Dataset linear_toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d = fixtures::random_dataset(n, 2, rng, false);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = 2.0 * d.x(i, 0) + 0.5 * rng.normal();
  return d;
}

SamplerConfig toy_cfg(std::uint64_t seed) {
  SamplerConfig c;
  c.num_trees = 10;
  c.n_burn = 100;
  c.n_keep = 200;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Loo, SingleDrawIsPlugIn) {
  const std::vector<std::vector<double>> ll = {{-1.5, -0.2, -3.0}};
  const LooResult r = loo_from_log_lik(ll);
  EXPECT_EQ(r.pointwise, ll[0]);
  EXPECT_DOUBLE_EQ(r.elpd_loo, -4.7);
}

TEST(Loo, ConstantAcrossDrawsIsPlugIn) {
  const std::vector<std::vector<double>> ll(50, std::vector<double>{-0.7, -2.0});
  const LooResult r = loo_from_log_lik(ll);
  EXPECT_NEAR(r.pointwise[0], -0.7, 1e-14);
  EXPECT_NEAR(r.pointwise[1], -2.0, 1e-14);
  EXPECT_NEAR(r.elpd_loo, -2.7, 1e-13);
}

TEST(Loo, HalfProbabilityBernoulli) {
  const std::vector<std::vector<double>> ll(40, std::vector<double>(5, std::log(0.5)));
  const LooResult r = loo_from_log_lik(ll);
  for (double v : r.pointwise) EXPECT_NEAR(v, std::log(0.5), 1e-14);
}

TEST(Psis, ConstantRatiosKeepUniformWeights) {
  const std::vector<double> lr(100, 1.3);
  const PsisResult r = psis_smooth(lr);
  for (double w : r.weights) EXPECT_NEAR(w, 0.01, 1e-15);
  EXPECT_TRUE(std::isnan(r.pareto_k));
}

TEST(Psis, TailLength) {
  EXPECT_EQ(psis_tail_length(4000), 190u);  // ceil(min(800, 3 sqrt(4000)))
  EXPECT_EQ(psis_tail_length(100), 20u);
}

// One tail of 190 points has sd(k) ~ 0.09, so single draws land outside
// +-0.1 about a third of the time. The band is checked on the mean.
TEST(Psis, RecoversParetoShape) {
  double total = 0.0;
  int inside = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double k = psis_smooth(pareto_log_ratios(0.3, 4000, 10 + s)).pareto_k;
    total += k;
    inside += std::abs(k - 0.3) <= 0.1;
  }
  EXPECT_NEAR(total / 20, 0.3, 0.1);
  EXPECT_GE(inside, 10);
}

TEST(Psis, NormalizedAndOrderPreserving) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> lr(500);
    for (auto& v : lr) v = rng.normal(0.0, 1.0 + rep * 0.2);
    const PsisResult r = psis_smooth(lr);
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-12);
    std::vector<std::size_t> idx(lr.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return lr[a] < lr[b]; });
    for (std::size_t t = 1; t < idx.size(); ++t) ASSERT_LE(r.weights[idx[t - 1]], r.weights[idx[t]]);
  }
}

// Reference values from an independent numpy implementation of the standard
// smoothing algorithm (profile-likelihood tail fit with the weak prior toward
// 0.5, truncation at the raw maximum) on closed-form log-likelihood tables.
TEST(Psis, MatchesReferenceImplementation) {
  const std::size_t draws = 1000;
  std::vector<std::vector<double>> bounded(draws, std::vector<double>(3)), heavy = bounded;
  const boost::math::normal unit;
  for (std::size_t d = 0; d < draws; ++d) {
    const double z = boost::math::quantile(unit, (static_cast<double>((d * 7919) % draws) + 0.5) / draws);
    for (std::size_t i = 0; i < 3; ++i) {
      const double a = (0.5 + i) * std::sin(0.7 * d + 1.3 * i);
      bounded[d][i] = -0.5 * a * a;
      heavy[d][i] = -0.5 * std::pow(0.3 * (1.0 + i) * z, 2);
    }
  }
  const LooResult b = loo_from_log_lik(bounded), h = loo_from_log_lik(heavy);
  const double b_elpd[] = {-0.0634926569481875, -0.640276297181648, -2.09840028476423};
  const double b_k[] = {-1.5058223325457, -1.51196119623193, -1.66376706038245};
  const double h_elpd[] = {-0.0470889414092657, -0.220516243359879, -0.695078306970698};
  const double h_k[] = {0.155236518429352, 0.360924325268982, 0.700863155486514};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(b.pointwise[i], b_elpd[i], 1e-10);
    EXPECT_NEAR(b.pareto_k[i], b_k[i], 1e-9);
    EXPECT_NEAR(h.pointwise[i], h_elpd[i], 1e-10);
    EXPECT_NEAR(h.pareto_k[i], h_k[i], 1e-9);
  }
}

TEST(Psis, GeneralizedParetoFit) {
  Rng rng(4);
  std::vector<double> x(5000);
  for (auto& v : x) v = 2.0 * (std::pow(rng.uniform_open(), -0.5) - 1.0) / 0.5;
  std::sort(x.begin(), x.end());
  const GeneralizedPareto g = fit_generalized_pareto(x);
  EXPECT_NEAR(g.k, 0.5, 0.08);
  EXPECT_NEAR(g.sigma, 2.0, 0.2);
  EXPECT_NEAR(g.quantile(0.5), g.sigma * (std::pow(0.5, -g.k) - 1.0) / g.k, 1e-12);
}

TEST(Psis, RelativeEfficiency) {
  Rng rng(5);
  std::vector<double> iid(4000), ar(4000);
  double prev = 0.0;
  for (std::size_t t = 0; t < 4000; ++t) {
    iid[t] = rng.normal();
    prev = 0.9 * prev + std::sqrt(1 - 0.81) * rng.normal();
    ar[t] = prev;
  }
  EXPECT_NEAR(relative_efficiency(iid), 1.0, 0.15);
  EXPECT_NEAR(relative_efficiency(ar), 0.1 / 1.9, 0.03);
}

TEST(Loo, GaussianFlatLimit) {
  const Dataset d = linear_toy(30, 6);
  const Chain ch = fit(d, toy_cfg(7));
  LooOptions o;
  o.sigma_override = 1e6;
  const LooResult r = elpd_loo_gaussian(ch, d, o);
  const double flat = -std::log(1e6) - 0.5 * std::log(2 * std::numbers::pi);
  for (double v : r.pointwise) EXPECT_NEAR(v / flat, 1.0, 1e-6);
}

TEST(Loo, GaussianUsesTreesOrTrainFits) {
  const Dataset d = linear_toy(40, 8);
  SamplerConfig c = toy_cfg(9);
  c.keep_train_fits = true;
  const Chain ch = fit(d, c);
  const LooResult a = elpd_loo_gaussian(ch, d);
  Chain no_fits = ch;
  for (auto& dr : no_fits.draws) dr.train_fit.clear();
  const LooResult b = elpd_loo_gaussian(no_fits, d);
  EXPECT_NEAR(a.elpd_loo, b.elpd_loo, 1e-8);
  EXPECT_GE(a.mc_se, 0.0);
  EXPECT_EQ(a.pareto_k.size(), 40u);
}

TEST(Loo, ExactOracleGuards) {
  const Dataset one = linear_toy(1, 10);
  EXPECT_THROW(exact_loo_oracle(one, toy_cfg(1)), std::invalid_argument);
  const Dataset big = linear_toy(60, 10);
  EXPECT_THROW(exact_loo_oracle(big, toy_cfg(1)), std::invalid_argument);
}

TEST(Loo, ExactOracleReproducible) {
  const Dataset d = linear_toy(10, 11);
  const LooResult a = exact_loo_oracle(d, toy_cfg(12));
  const LooResult b = exact_loo_oracle(d, toy_cfg(12));
  EXPECT_TRUE(std::isfinite(a.elpd_loo));
  EXPECT_EQ(a.elpd_loo, b.elpd_loo);
  EXPECT_EQ(a.pointwise, b.pointwise);
}

TEST(Loo, BernoulliFinite) {
  Rng rng(13);
  Dataset d = fixtures::random_dataset(40, 2, rng, false);
  for (std::size_t i = 0; i < 40; ++i) d.y[i] = d.x(i, 0) + 0.3 * rng.normal() > 0.5 ? 1.0 : 0.0;
  d.response = ResponseKind::Binary;
  const Chain ch = fit(d, toy_cfg(14));
  const LooResult r = elpd_loo(ch, d);
  EXPECT_TRUE(std::isfinite(r.elpd_loo));
  for (double v : r.pointwise) EXPECT_LT(v, 0.0);
}
