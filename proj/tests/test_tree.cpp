#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <tuple>
#include <numbers>
#include <numeric>

#include "bartvs/tree.hpp"
#include "fixtures.hpp"
#include "tree_oracles.hpp"

using namespace bartvs;

namespace {

SplitRule rule(int var, double value) { return SplitRule{var, 0, value}; }

}  // namespace

using namespace oracles;

TEST(Tree, RootOnlyEvaluatesToConstant) {
  Tree t(3, 2.5);
  const double x[3] = {0.1, -4, 9};
  EXPECT_EQ(t.evaluate(x), 2.5);
  t.check_invariants();
}

TEST(Tree, SingleSplitRoutesByThreshold) {
  Tree t(1);
  auto [l, r] = t.grow(t.root(), rule(0, 0.5));
  t.set_mu(l, -1);
  t.set_mu(r, 1);
  const double a[1] = {0.3}, b[1] = {0.7}, c[1] = {0.5};
  EXPECT_EQ(t.evaluate(a), -1);
  EXPECT_EQ(t.evaluate(b), 1);
  EXPECT_EQ(t.evaluate(c), 1);  // ties go right: x < cut is left
}

TEST(Tree, EvaluateRejectsWrongDimension) {
  Tree t(2);
  const double x[3] = {0, 0, 0};
  EXPECT_THROW(t.evaluate(x), std::invalid_argument);
}

TEST(Tree, DepthTwoMatchesPathEnumeration) {
  Tree t(3);
  auto [l, r] = t.grow(t.root(), rule(0, 0.5));
  auto [ll, lr] = t.grow(l, rule(1, 0.3));
  auto [rl, rr] = t.grow(r, rule(2, 0.7));
  t.set_mu(ll, 1);
  t.set_mu(lr, 2);
  t.set_mu(rl, 3);
  t.set_mu(rr, 4);
  t.check_invariants();
  struct Path {
    std::vector<std::tuple<int, double, bool>> conds;  // var, cut, goes-left
    double value;
  };
  const std::vector<Path> paths = {
      {{{0, 0.5, true}, {1, 0.3, true}}, 1},
      {{{0, 0.5, true}, {1, 0.3, false}}, 2},
      {{{0, 0.5, false}, {2, 0.7, true}}, 3},
      {{{0, 0.5, false}, {2, 0.7, false}}, 4},
  };
  const double probes[8][3] = {{0.1, 0.1, 0.9}, {0.1, 0.9, 0.1}, {0.9, 0.1, 0.1}, {0.9, 0.9, 0.9},
                               {0.5, 0.3, 0.7}, {0.49, 0.29, 0.0}, {0.7, 0.0, 0.69}, {0.2, 0.3, 0.5}};
  for (const auto& x : probes) {
    int hits = 0;
    double expect = 0;
    for (const auto& p : paths) {
      bool ok = true;
      for (auto [v, c, left] : p.conds) ok = ok && ((x[v] < c) == left);
      if (ok) {
        ++hits;
        expect = p.value;
      }
    }
    ASSERT_EQ(hits, 1);
    EXPECT_EQ(t.evaluate(x), expect);
  }
}

TEST(Tree, SecondGenerationAndPrune) {
  Tree t(1);
  auto [l, r] = t.grow(t.root(), rule(0, 0.5));
  EXPECT_EQ(t.second_generation_nodes(), std::vector<NodeId>{t.root()});
  t.grow(l, rule(0, 0.25));
  EXPECT_EQ(t.second_generation_nodes(), std::vector<NodeId>{l});
  EXPECT_EQ(t.num_terminal(), 3);
  EXPECT_THROW(t.prune(t.root()), std::logic_error);
  t.prune(l);
  t.check_invariants();
  EXPECT_EQ(t.num_terminal(), 2);
  // freed slots are reused
  const auto size = t.arena_size();
  t.grow(r, rule(0, 0.75));
  EXPECT_EQ(t.arena_size(), size);
  t.check_invariants();
}

TEST(CutpointGrid, BuildAndRank) {
  Dataset d;
  d.x = Matrix(4, 3);
  const double cont[4] = {0, 1, 0.5, 0.25};
  const double bin[4] = {0, 1, 1, 0};
  for (int i = 0; i < 4; ++i) {
    d.x(i, 0) = cont[i];
    d.x(i, 1) = bin[i];
    d.x(i, 2) = 7;
  }
  d.types = {PredictorType::Continuous, PredictorType::Binary, PredictorType::Continuous};
  const auto g = CutpointGrid::build(d, 100);
  ASSERT_EQ(g.cuts(0).size(), 100u);
  EXPECT_NEAR(g.cuts(0)[0], 1.0 / 101, 1e-15);
  ASSERT_EQ(g.cuts(1).size(), 1u);
  EXPECT_EQ(g.cuts(1)[0], 0.5);
  EXPECT_TRUE(g.cuts(2).empty());
  for (std::size_t c = 0; c < 100; ++c) {
    const double v = g.cuts(0)[c];
    EXPECT_EQ(g.rank(0, v), c + 1);
    EXPECT_EQ(g.rank(0, std::nextafter(v, -1.0)), c);
  }
  EXPECT_THROW(CutpointGrid(std::vector<std::vector<double>>{{0.5, 0.5}}), std::invalid_argument);
}

TEST(Proposal, RootOnlyBinaryPredictor) {
  Dataset d;
  d.x = Matrix(6, 1);
  for (int i = 0; i < 6; ++i) d.x(i, 0) = i % 2;
  d.types = {PredictorType::Binary};
  d.y.assign(6, 0);
  BinnedPredictors bp(d.x, CutpointGrid::build(d));
  Tree t(1);
  NodeMembership m(t, bp);
  Rng rng(1);
  auto prop = propose_birth(t, m, bp, rng);
  ASSERT_TRUE(prop);
  EXPECT_EQ(prop->leaf, t.root());
  EXPECT_EQ(prop->rule.var, 0);
  EXPECT_EQ(prop->p_adj, 1);
  EXPECT_EQ(prop->n_adj, 1);
}

TEST(Proposal, ConstantDataHasNoBirth) {
  Dataset d;
  d.x = Matrix(5, 2, 3.0);
  d.y.assign(5, 0);
  BinnedPredictors bp(d.x, CutpointGrid(std::vector<std::vector<double>>{{1.0, 2.0}, {4.0}}));
  Tree t(2);
  NodeMembership m(t, bp);
  Rng rng(1);
  EXPECT_FALSE(propose_birth(t, m, bp, rng));
  EXPECT_EQ(birth_move_probability(t, m.num_growable()), 0.0);
}

TEST(Proposal, PredictorFrequenciesUniformOverValid) {
  Rng gen(3);
  Dataset d = fixtures::random_dataset(40, 3, gen, false);
  for (std::size_t i = 0; i < 40; ++i) d.x(i, 2) = 1.0;  // constant: never valid
  BinnedPredictors bp(d.x, CutpointGrid::build(d));
  Tree t(3);
  NodeMembership m(t, bp);
  Rng rng(9);
  const int trials = 10000;
  int counts[3] = {0, 0, 0};
  for (int s = 0; s < trials; ++s) {
    auto prop = propose_birth(t, m, bp, rng);
    ASSERT_TRUE(prop);
    EXPECT_EQ(prop->p_adj, 2);
    ++counts[prop->rule.var];
  }
  EXPECT_EQ(counts[2], 0);
  const double sd = std::sqrt(trials * 0.25);
  EXPECT_LE(std::abs(counts[0] - trials / 2.0), 3 * sd);
}

TEST(Proposal, DeathSingleSplitAndRootOnly) {
  Tree t(1);
  Rng rng(2);
  EXPECT_FALSE(propose_death(t, rng));
  t.grow(t.root(), rule(0, 0.5));
  auto dp = propose_death(t, rng);
  ASSERT_TRUE(dp);
  EXPECT_EQ(dp->node, t.root());
  EXPECT_EQ(dp->w2, 1);
}

TEST(Proposal, DeathUniformOverThreeCandidates) {
  Tree t(1);
  auto [l, r] = t.grow(t.root(), rule(0, 0.5));
  auto [ll, lr] = t.grow(l, rule(0, 0.25));
  t.grow(ll, rule(0, 0.1));
  t.grow(lr, rule(0, 0.4));
  t.grow(r, rule(0, 0.75));
  const auto cands = t.second_generation_nodes();
  ASSERT_EQ(cands.size(), 3u);
  Rng rng(4);
  std::map<NodeId, int> freq;
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) {
    auto dp = propose_death(t, rng);
    ASSERT_TRUE(dp);
    EXPECT_EQ(dp->w2, 3);
    ++freq[dp->node];
  }
  const double sd = std::sqrt(trials * (1.0 / 3) * (2.0 / 3));
  for (NodeId c : cands) EXPECT_LE(std::abs(freq[c] - trials / 3.0), 3 * sd);
}

TEST(BirthRatio, ClosedFormPieces) {
  EXPECT_DOUBLE_EQ(nodes_ratio(1), 2.0 / 3.0);
  EXPECT_NEAR(depth_ratio(0, 0.95, 2.0), 11.04671875, 1e-12);
  EXPECT_DOUBLE_EQ(metropolis_acceptance(0.3), 0.3);
  EXPECT_DOUBLE_EQ(metropolis_acceptance(11.05), 1.0);
  EXPECT_DOUBLE_EQ(metropolis_acceptance(1.0), 1.0);
  EXPECT_THROW(metropolis_acceptance(0.0), std::domain_error);
  EXPECT_THROW(metropolis_acceptance(NAN), std::domain_error);
  EXPECT_DOUBLE_EQ(metropolis_acceptance_log(std::log(0.3)), 0.3);
  EXPECT_EQ(metropolis_acceptance_log(1e6), 1.0);
}

TEST(BirthRatio, LikelihoodRatioMatchesQuadrature) {
  const double res[6] = {0.3, -1.2, 0.8, 2.1, 1.7, 2.6};
  const double s2 = 0.7, t2 = 0.4;
  using boost::math::quadrature::gauss_kronrod;
  auto marginal = [&](std::size_t from, std::size_t to) {
    auto f = [&](double mu) {
      double lp = -0.5 * mu * mu / t2 - 0.5 * std::log(2 * std::numbers::pi * t2);
      for (std::size_t i = from; i < to; ++i) {
        lp += -0.5 * (res[i] - mu) * (res[i] - mu) / s2 - 0.5 * std::log(2 * std::numbers::pi * s2);
      }
      return std::exp(lp);
    };
    return gauss_kronrod<double, 61>::integrate(f, -30.0, 30.0, 15, 1e-15);
  };
  const double direct = marginal(0, 3) * marginal(3, 6) / marginal(0, 6);

  Dataset d;
  d.x = Matrix(6, 1);
  for (int i = 0; i < 6; ++i) d.x(i, 0) = i;
  d.y.assign(res, res + 6);
  BinnedPredictors bp(d.x, CutpointGrid(std::vector<std::vector<double>>{{2.5}}));
  Tree t(1);
  NodeMembership m(t, bp);
  BirthProposal prop{t.root(), SplitRule{0, 0, 2.5}, 1, 1, 1};
  TreePrior pr{0.95, 2.0, std::sqrt(t2)};
  const BirthRatio br = birth_ratio_components(t, m, bp, prop, res, s2, pr);
  EXPECT_NEAR(br.likelihood_ratio / direct, 1.0, 1e-12);
  EXPECT_NEAR(leaf_log_evidence(3, res[0] + res[1] + res[2], s2, t2) +
                  leaf_log_evidence(3, res[3] + res[4] + res[5], s2, t2) -
                  leaf_log_evidence(6, std::accumulate(res, res + 6, 0.0), s2, t2),
              std::log(direct), 1e-12);
}

// Whole-tree assembly of the BIRTH ratio from the tree prior, proposal
// probabilities, and marginal likelihoods, compared with the factored form.
TEST(BirthRatio, MatchesDirectAssemblyOn100Fixtures) {
  Rng gen(2024);
  for (int fx = 0; fx < 100; ++fx) {
    const std::size_t n = 20 + gen.index(40);
    const std::size_t p = 1 + gen.index(4);
    Dataset d = fixtures::random_dataset(n, p, gen);
    const CutpointGrid grid = CutpointGrid::build(d, 5 + static_cast<int>(gen.index(20)));
    BinnedPredictors bp(d.x, grid);
    Tree t(p);
    NodeMembership m(t, bp);
    fixtures::grow_random(t, m, bp, gen, static_cast<int>(gen.index(6)));
    auto prop = propose_birth(t, m, bp, gen);
    if (!prop) continue;
    TreePrior pr{0.5 + 0.49 * gen.uniform(), 0.5 + 2.5 * gen.uniform(), 0.1 + gen.uniform()};
    const double s2 = 0.2 + 2 * gen.uniform();
    std::vector<double> res(n);
    for (auto& v : res) v = gen.normal(0.0, 1.5);

    const BirthRatio br = birth_ratio_components(t, m, bp, *prop, res, s2, pr);

    Tree grown = t;
    grown.grow(prop->leaf, prop->rule);
    const auto rows = rows_per_node(t, d.x);
    const auto& leaf_rows = rows[static_cast<std::size_t>(prop->leaf)];
    const int p_adj = oracle_p_adj(leaf_rows, d.x, grid);
    const int n_adj = oracle_n_adj(leaf_rows, d.x, grid, static_cast<std::size_t>(prop->rule.var));
    ASSERT_EQ(p_adj, prop->p_adj);
    ASSERT_EQ(n_adj, prop->n_adj);
    const int bg = count_growable_leaves(t, d.x, grid);
    const int bg_next = count_growable_leaves(grown, d.x, grid);
    const double q_fwd = p_birth_of(t.num_terminal(), bg) / bg / p_adj / n_adj;
    const double q_back = (1.0 - p_birth_of(grown.num_terminal(), bg_next)) / count_second_gen(grown);
    const double t2 = pr.leaf_sd * pr.leaf_sd;
    const double log_r = log_tree_prior(grown, d.x, grid, pr) - log_tree_prior(t, d.x, grid, pr) +
                         std::log(q_back / q_fwd) + log_marginal(grown, d.x, res, s2, t2) -
                         log_marginal(t, d.x, res, s2, t2);

    const double tol = 1e-10 * std::max(1.0, std::abs(log_r));
    EXPECT_NEAR(br.log_r, log_r, tol) << "fixture " << fx;
    EXPECT_NEAR(std::log(br.nodes_ratio) + std::log(br.depth_ratio) + std::log(br.likelihood_ratio), br.log_r, tol);

    // DEATH from the grown tree back is the exact reverse move.
    NodeMembership gm(grown, bp);
    const DeathProposal dp{prop->leaf, count_second_gen(grown)};
    EXPECT_NEAR(death_log_ratio(grown, gm, bp, dp, res, s2, pr), -log_r, tol);
  }
}

// 1e5 MH steps with random residuals; structure, counts, membership, and cached
// ratios are checked after every move.
TEST(BirthDeath, InvariantsOverManySteps) {
  Rng gen(77);
  Dataset d = fixtures::random_dataset(60, 4, gen);
  BinnedPredictors bp(d.x, CutpointGrid::build(d, 20));
  Tree t(4);
  NodeMembership m(t, bp);
  TreePrior pr{0.95, 1.0, 0.5};
  std::vector<double> res(60);
  for (auto& v : res) v = gen.normal(0.0, 2.0);
  Rng rng(5);
  int births = 0, deaths = 0;
  for (int step = 0; step < 100000; ++step) {
    const int b = t.num_terminal();
    if (rng.uniform() < birth_move_probability(t, m.num_growable())) {
      auto prop = propose_birth(t, m, bp, rng);
      ASSERT_TRUE(prop);
      BirthPartition part;
      const BirthRatio br = birth_ratio_components(t, m, bp, *prop, res, 1.0, pr, &part);
      const double a = metropolis_acceptance_log(br.log_r);
      if (rng.uniform() < a) {
        auto [l, r] = t.grow(prop->leaf, prop->rule, a);
        m.apply_grow(prop->leaf, l, r, std::move(part));
        ASSERT_EQ(t.num_terminal(), b + 1);
        const double cached = t.node(prop->leaf).birth_ratio;
        ASSERT_EQ(cached, a);
        ASSERT_TRUE(cached > 0.0 && cached <= 1.0);
        ++births;
      }
    } else {
      auto dp = propose_death(t, rng);
      ASSERT_TRUE(dp);
      if (rng.uniform() < metropolis_acceptance_log(death_log_ratio(t, m, bp, *dp, res, 1.0, pr))) {
        const Node nd = t.node(dp->node);
        m.apply_prune(dp->node, nd.left, nd.right, bp);
        t.prune(dp->node);
        ASSERT_EQ(t.num_terminal(), b - 1);
        ++deaths;
      }
    }
    ASSERT_NO_THROW(t.check_invariants());
    if (step % 97 == 0) {
      // routing partition: every row in exactly one leaf, the one it routes to
      std::vector<int> seen(60, 0);
      for (NodeId leaf : t.terminal_nodes()) {
        for (auto i : m.members(leaf)) {
          ++seen[i];
          ASSERT_EQ(t.leaf_for(d.x.row(i)), leaf);
        }
      }
      for (int s : seen) ASSERT_EQ(s, 1);
      ASSERT_EQ(m.num_growable(), count_growable_leaves(t, d.x, bp.grid()));
    }
  }
  EXPECT_GT(births, 100);
  EXPECT_GT(deaths, 100);
}

// With a vanishing leaf variance the likelihood ratio is 1, so the chain
// samples the tree prior; P(b = 1) = 1 - gamma follows directly.
TEST(BirthDeath, RecoversRootSplitProbability) {
  Rng gen(5);
  Dataset d = fixtures::random_dataset(2000, 3, gen, false);
  BinnedPredictors bp(d.x, CutpointGrid::build(d, 100));
  Tree t(3);
  NodeMembership m(t, bp);
  TreePrior pr{0.95, 2.0, 1e-9};
  std::vector<double> res(2000, 0.0);
  Rng rng(11);
  long root_only = 0;
  const long steps = 200000;
  for (long s = 0; s < steps; ++s) {
    if (rng.uniform() < birth_move_probability(t, m.num_growable())) {
      auto prop = propose_birth(t, m, bp, rng);
      BirthPartition part;
      const auto br = birth_ratio_components(t, m, bp, *prop, res, 1.0, pr, &part);
      if (rng.uniform() < metropolis_acceptance_log(br.log_r)) {
        auto [l, r] = t.grow(prop->leaf, prop->rule, 1);
        m.apply_grow(prop->leaf, l, r, std::move(part));
      }
    } else {
      auto dp = propose_death(t, rng);
      if (rng.uniform() < metropolis_acceptance_log(death_log_ratio(t, m, bp, *dp, res, 1.0, pr))) {
        const Node nd = t.node(dp->node);
        m.apply_prune(dp->node, nd.left, nd.right, bp);
        t.prune(dp->node);
      }
    }
    root_only += t.num_terminal() == 1;
  }
  // autocorrelated chain: generous band around 0.05
  EXPECT_NEAR(static_cast<double>(root_only) / steps, 0.05, 0.01);
}
