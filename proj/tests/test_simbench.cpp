#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bartvs/simbench.hpp"

using namespace bartvs;

namespace {

std::vector<double> row(const Dataset& d, std::size_t i) {
  std::vector<double> r(d.p());
  for (std::size_t j = 0; j < d.p(); ++j) r[j] = d.x(i, j);
  return r;
}

double correlation(const Dataset& d, std::size_t a, std::size_t b) {
  const double n = static_cast<double>(d.n());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    ma += d.x(i, a);
    mb += d.x(i, b);
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double u = d.x(i, a) - ma, v = d.x(i, b) - mb;
    sab += u * v;
    saa += u * u;
    sbb += v * v;
  }
  return sab / std::sqrt(saa * sbb);
}

BenchConfig tiny_bench(int threads) {
  BenchConfig c;
  c.scenario = {ScenarioId::CC1, 80, 6, 1.0};
  c.reps = 2;
  c.methods = {"permute-vip", "permute-mi", "dart-10", "abc-5-0.50"};
  c.seed = 17;
  c.threads = threads;
  c.sampler.n_burn = 30;
  c.sampler.n_keep = 30;
  c.permutation.num_null = 4;
  c.permutation.num_rep = 1;
  c.abc.iterations = 20;
  c.abc.burn = 10;
  return c;
}

}  // namespace

TEST(Scenario, NamesAndResolve) {
  EXPECT_EQ(parse_scenario("c.c.1"), ScenarioId::CC1);
  EXPECT_EQ(parse_scenario("BM2"), ScenarioId::BM2);
  EXPECT_FALSE(parse_scenario("CC3"));
  for (auto id : {ScenarioId::CC1, ScenarioId::CM2, ScenarioId::EX2}) EXPECT_EQ(parse_scenario(to_string(id)), id);
  EXPECT_EQ(resolve({ScenarioId::CC1, 500, 0, 1.0}).p, 50u);
  EXPECT_EQ(resolve({ScenarioId::CM2, 500, 0, 1.0}).p, 84u);
  EXPECT_EQ(resolve({ScenarioId::EX1, 500, 0, 1.0}).p, 20u);
  EXPECT_THROW(resolve({ScenarioId::CM2, 500, 100, 1.0}), std::invalid_argument);
  EXPECT_THROW(resolve({ScenarioId::CC1, 500, 4, 1.0}), std::invalid_argument);
  EXPECT_THROW(resolve({ScenarioId::CC2, 500, 9, 1.0}), std::invalid_argument);
  EXPECT_THROW(resolve({ScenarioId::CC1, 1, 10, 1.0}), std::invalid_argument);
  EXPECT_THROW(resolve({ScenarioId::CC1, 50, 10, -1.0}), std::invalid_argument);
}

TEST(Scenario, RelevantSets) {
  EXPECT_EQ(relevant_set(ScenarioId::CC1, 50), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(relevant_set(ScenarioId::CM2, 84), (std::vector<int>{0, 20, 40, 41, 42, 43}));
  EXPECT_EQ(relevant_set(ScenarioId::EX2, 20), (std::vector<int>{0, 1, 10, 11, 12}));
  Rng rng(1);
  EXPECT_EQ(gen_scenario({ScenarioId::BC1, 30, 10, 1.0}, rng).relevant, relevant_set(ScenarioId::BC1, 10));
}

TEST(Scenario, NoiseFreeResponseIsTheMean) {
  for (auto id : {ScenarioId::CC1, ScenarioId::CC2, ScenarioId::CM1, ScenarioId::CM2, ScenarioId::EX1, ScenarioId::EX2}) {
    Rng rng(2);
    const Dataset d = gen_scenario({id, 50, 0, 0.0}, rng);
    for (std::size_t i = 0; i < d.n(); ++i) ASSERT_EQ(d.y[i], scenario_mean(id, row(d, i))) << to_string(id);
  }
}

TEST(Scenario, BinaryResponses) {
  for (auto id : {ScenarioId::BC1, ScenarioId::BC2, ScenarioId::BM1, ScenarioId::BM2}) {
    Rng rng(3);
    const Dataset d = gen_scenario({id, 20000, 0, 1.0}, rng);
    EXPECT_EQ(d.response, ResponseKind::Binary);
    double mean_f = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
      ASSERT_TRUE(d.y[i] == 0.0 || d.y[i] == 1.0);
      const double f = scenario_mean(id, row(d, i));
      mean_f += f;
      sd += f * f;
    }
    mean_f /= static_cast<double>(d.n());
    sd = std::sqrt(sd / static_cast<double>(d.n()) - mean_f * mean_f);
    // centred latent mean
    EXPECT_LT(std::abs(mean_f), 4 * sd / std::sqrt(static_cast<double>(d.n()))) << to_string(id);
  }
}

TEST(Scenario, PredictorCorrelation) {
  Rng rng(4);
  const Dataset ar = gen_scenario({ScenarioId::CC2, 100000, 10, 1.0}, rng);
  for (std::size_t j = 0; j + 1 < 10; ++j) EXPECT_NEAR(correlation(ar, j, j + 1), 0.3, 0.01);
  EXPECT_NEAR(correlation(ar, 0, 2), 0.09, 0.01);
  const Dataset eq = gen_scenario({ScenarioId::CM2, 20000, 0, 1.0}, rng);
  std::vector<std::size_t> cont;
  for (std::size_t j = 0; j < eq.p(); ++j) {
    if (eq.types[j] == PredictorType::Continuous) cont.push_back(j);
  }
  ASSERT_GE(cont.size(), 3u);
  EXPECT_NEAR(correlation(eq, cont[0], cont[1]), 0.3, 0.03);
  EXPECT_NEAR(correlation(eq, cont[0], cont.back()), 0.3, 0.03);
}

TEST(Metrics, HandCases) {
  const std::vector<int> rel = {0, 1, 2, 3, 4};
  const auto m = selection_metrics(std::vector<int>{0, 1, 2, 3, 4, 9}, rel, 10);
  EXPECT_DOUBLE_EQ(m.precision, 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.f1, 10.0 / 11.0);
  EXPECT_FALSE(m.missed);
  const auto e = selection_metrics(std::vector<int>{}, rel, 10);
  EXPECT_TRUE(e.empty);
  EXPECT_TRUE(e.missed);
  EXPECT_EQ(e.precision, 0.0);
  EXPECT_EQ(e.recall, 0.0);
  EXPECT_EQ(e.f1, 0.0);
  EXPECT_EQ(selection_metrics(std::vector<int>{3}, std::vector<int>{}, 10).recall, 1.0);
  EXPECT_THROW(selection_metrics(std::vector<int>{10}, rel, 10), std::invalid_argument);
  EXPECT_EQ(selection_metrics(std::vector<int>{1, 1, 7}, rel, 10).fp, 1);
}

TEST(Metrics, RandomPairsAgainstSetOracle) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t p = 1 + rng.index(30);
    std::vector<int> sel, rel;
    for (std::size_t j = 0; j < p; ++j) {
      if (rng.bernoulli(0.3)) sel.push_back(static_cast<int>(j));
      if (rng.bernoulli(0.2)) rel.push_back(static_cast<int>(j));
    }
    const std::set<int> s(sel.begin(), sel.end()), r(rel.begin(), rel.end());
    int tp = 0;
    for (int j : s) tp += r.count(j) > 0;
    const int fp = static_cast<int>(s.size()) - tp, fn = static_cast<int>(r.size()) - tp;
    const double prec = s.empty() ? 0.0 : double(tp) / double(s.size());
    const double rec = r.empty() ? 1.0 : double(tp) / double(r.size());
    const double f1 = prec + rec == 0.0 ? 0.0 : 2 * prec * rec / (prec + rec);
    const auto m = selection_metrics(sel, rel, p);
    ASSERT_EQ(m.tp, tp);
    ASSERT_EQ(m.fp, fp);
    ASSERT_EQ(m.fn, fn);
    ASSERT_NEAR(m.precision, prec, 1e-15);
    ASSERT_NEAR(m.recall, rec, 1e-15);
    ASSERT_NEAR(m.f1, f1, 1e-15);
    ASSERT_EQ(m.missed, fn > 0);
    ASSERT_EQ(m.empty, s.empty());
  }
}

TEST(Metrics, MeanAndSe) {
  const std::vector<double> v = {1, 2, 3, 4};
  const auto [m, se] = mean_and_se(v);
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_DOUBLE_EQ(se, std::sqrt(5.0 / 3.0) / 2.0);
  EXPECT_EQ(mean_and_se(std::vector<double>{0.7}).second, 0.0);
}

TEST(Methods, Parse) {
  EXPECT_EQ(parse_method("permute-vip").family, MethodSpec::Family::PermuteVip);
  EXPECT_EQ(parse_method("permute-wtvip").family, MethodSpec::Family::PermuteWithinType);
  EXPECT_EQ(parse_method("permute-mi").family, MethodSpec::Family::PermuteMi);
  EXPECT_EQ(parse_method("backward").num_trees, 50);
  const auto d = parse_method("dart-200");
  EXPECT_EQ(d.family, MethodSpec::Family::Dart);
  EXPECT_EQ(d.num_trees, 200);
  const auto a = parse_method("abc-10-0.50");
  EXPECT_EQ(a.family, MethodSpec::Family::Abc);
  EXPECT_EQ(a.num_trees, 10);
  EXPECT_DOUBLE_EQ(a.threshold, 0.5);
  for (const char* bad : {"lasso", "dart-", "dart-0", "dart-x", "abc-10", "abc-10-1.5", "abc-10-0.5z"}) {
    EXPECT_THROW(parse_method(bad), std::invalid_argument) << bad;
  }
}

TEST(Bench, ReproducibleAcrossRunsAndThreads) {
  const BenchResult a = run_benchmark(tiny_bench(1));
  const BenchResult b = run_benchmark(tiny_bench(1));
  const BenchResult c = run_benchmark(tiny_bench(3));
  ASSERT_EQ(a.records.size(), 8u);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_TRUE(a.records[k].error.empty()) << a.records[k].error;
    EXPECT_EQ(a.records[k].method, b.records[k].method);
    EXPECT_EQ(a.records[k].selected, b.records[k].selected);
    EXPECT_EQ(a.records[k].selected, c.records[k].selected);
    EXPECT_EQ(a.records[k].rep, c.records[k].rep);
  }
  ASSERT_EQ(a.methods.size(), 4u);
  for (std::size_t m = 0; m < 4; ++m) {
    EXPECT_EQ(a.methods[m].method, tiny_bench(1).methods[m]);
    EXPECT_EQ(a.methods[m].reps, 2);
    EXPECT_EQ(a.methods[m].recall, c.methods[m].recall);
    EXPECT_EQ(a.methods[m].f1_se, c.methods[m].f1_se);
  }
}

TEST(Bench, SingleReplicationHasZeroSe) {
  BenchConfig cfg = tiny_bench(1);
  cfg.reps = 1;
  cfg.methods = {"dart-10"};
  const BenchResult r = run_benchmark(cfg);
  ASSERT_EQ(r.methods.size(), 1u);
  EXPECT_EQ(r.methods[0].r_miss_se, 0.0);
  EXPECT_EQ(r.methods[0].recall_se, 0.0);
  EXPECT_EQ(r.methods[0].f1_se, 0.0);
  cfg.methods = {"lasso"};
  EXPECT_THROW(run_benchmark(cfg), std::invalid_argument);
  cfg.methods = {"dart-10"};
  cfg.reps = 0;
  EXPECT_THROW(run_benchmark(cfg), std::invalid_argument);
}
