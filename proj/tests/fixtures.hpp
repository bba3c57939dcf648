#pragma once

#include <cmath>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/rng.hpp"
#include "bartvs/sampler.hpp"
#include "bartvs/tree.hpp"

namespace fixtures {

using namespace bartvs;

// Columns alternate binary / continuous when mixed is set.
inline Dataset random_dataset(std::size_t n, std::size_t p, Rng& rng, bool mixed = true) {
  Dataset d;
  d.x = Matrix(n, p);
  d.types.assign(p, PredictorType::Continuous);
  for (std::size_t j = 0; j < p; ++j) {
    const bool bin = mixed && j % 2 == 1;
    if (bin) d.types[j] = PredictorType::Binary;
    for (std::size_t i = 0; i < n; ++i) d.x(i, j) = bin ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.uniform();
  }
  d.names = default_names(p);
  d.y.resize(n);
  for (auto& v : d.y) v = rng.normal();
  return d;
}

// Chain holding only per-draw split statistics, which is all the importance
// measures read.
inline Chain chain_from_counts(const std::vector<std::vector<int>>& counts,
                               const std::vector<std::vector<double>>& accept = {},
                               std::vector<PredictorType> types = {}) {
  Chain c;
  c.num_predictors = counts.empty() ? 0 : counts[0].size();
  c.types = types.empty() ? std::vector<PredictorType>(c.num_predictors, PredictorType::Continuous) : types;
  c.names = default_names(c.num_predictors);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    PosteriorDraw d;
    d.split_counts = counts[k];
    d.accept_sums = accept.empty() ? std::vector<double>(counts[k].begin(), counts[k].end()) : accept[k];
    for (int v : counts[k]) d.num_internal += v;
    c.draws.push_back(d);
  }
  return c;
}

// Grows `splits` random valid splits without any acceptance step.
inline void grow_random(Tree& tree, NodeMembership& memb, const BinnedPredictors& data, Rng& rng, int splits) {
  for (int s = 0; s < splits; ++s) {
    auto prop = propose_birth(tree, memb, data, rng);
    if (!prop) return;
    auto [l, r] = tree.grow(prop->leaf, prop->rule, rng.uniform_open());
    memb.apply_grow(prop->leaf, l, r, prop->rule, data);
  }
}

}  // namespace fixtures
