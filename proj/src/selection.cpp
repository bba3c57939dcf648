#include "bartvs/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bartvs/loo.hpp"
#include "bartvs/parallel.hpp"

namespace bartvs {

std::vector<int> SelectionReport::selected_indices() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < selected.size(); ++j) {
    if (selected[j]) out.push_back(static_cast<int>(j));
  }
  return out;
}

namespace {

SelectionReport base_report(const Dataset& data, std::string method, const SamplerConfig& cfg) {
  SelectionReport r;
  r.method = std::move(method);
  r.names = data.names.empty() ? default_names(data.p()) : data.names;
  r.types = data.types;
  r.scores.assign(data.p(), 0.0);
  r.thresholds.assign(data.p(), 0.0);
  r.selected.assign(data.p(), false);
  r.seed = cfg.seed;
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool has_mixed_types(const Dataset& data) {
  const bool any_bin = std::any_of(data.types.begin(), data.types.end(),
                                   [](PredictorType t) { return t == PredictorType::Binary; });
  const bool any_cont = std::any_of(data.types.begin(), data.types.end(),
                                    [](PredictorType t) { return t == PredictorType::Continuous; });
  return any_bin && any_cont;
}

std::string method_name(ImportanceKind kind) {
  switch (kind) {
    case ImportanceKind::Vip: return "permute-vip";
    case ImportanceKind::WithinTypeVip: return "permute-wtvip";
    case ImportanceKind::Mi: return "permute-mi";
    default: return std::string("permute-") + to_string(kind);
  }
}

}  // namespace

double permutation_threshold(std::vector<double> null_scores, double alpha) {
  if (null_scores.empty()) throw std::invalid_argument("permutation_threshold: no null scores");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("permutation_threshold: alpha must lie in (0, 1)");
  std::sort(null_scores.begin(), null_scores.end());
  const double l = static_cast<double>(null_scores.size());
  // Guard against (1 - alpha) * L landing a hair above an integer.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * l - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, null_scores.size());
  return null_scores[rank - 1];
}

Dataset null_dataset(const Dataset& data, std::uint64_t seed, std::size_t index) {
  std::vector<double> y = data.y;
  Rng perm(derive_seed(seed, {1, index}));
  perm.shuffle(y);
  return data.with_response(std::move(y));
}

std::vector<SelectionReport> permutation_select(const Dataset& data, std::span<const ImportanceKind> kinds,
                                                const PermutationOptions& opts, const SamplerConfig& cfg) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw std::invalid_argument("permutation_select: alpha must lie in (0, 1)");
  if (opts.num_null < 1) throw std::invalid_argument("permutation_select: need at least one null dataset");
  if (opts.num_rep < 1) throw std::invalid_argument("permutation_select: need at least one repeat fit");
  if (kinds.empty()) throw std::invalid_argument("permutation_select: no importance kind requested");
  for (ImportanceKind k : kinds) {
    if (k != ImportanceKind::Vip && k != ImportanceKind::WithinTypeVip && k != ImportanceKind::Mi) {
      throw std::invalid_argument(std::string("permutation_select: unsupported importance ") + to_string(k));
    }
  }
  data.validate();
  const std::size_t p = data.p();
  const std::size_t nk = kinds.size();
  const std::size_t jobs = static_cast<std::size_t>(opts.num_rep + opts.num_null);
  // scores[job][kind][predictor]
  std::vector<std::vector<std::vector<double>>> scores(jobs);

  parallel_for(jobs, opts.threads, [&](std::size_t job) {
    SamplerConfig c = cfg;
    c.keep_trees = false;
    c.keep_train_fits = false;
    Chain chain;
    if (job < static_cast<std::size_t>(opts.num_rep)) {
      c.seed = derive_seed(cfg.seed, {0, job});
      chain = fit(data, c);
    } else {
      const std::size_t l = job - static_cast<std::size_t>(opts.num_rep);
      c.seed = derive_seed(cfg.seed, {2, l});
      chain = fit(null_dataset(data, cfg.seed, l), c);
    }
    auto& out = scores[job];
    out.resize(nk);
    for (std::size_t k = 0; k < nk; ++k) out[k] = importance(chain, kinds[k]).scores;
  });

  std::vector<SelectionReport> reports;
  for (std::size_t k = 0; k < nk; ++k) {
    SelectionReport r = base_report(data, method_name(kinds[k]), cfg);
    r.num_null = opts.num_null;
    r.num_rep = opts.num_rep;
    r.alpha = opts.alpha;
    r.num_fits = jobs;
    if (kinds[k] == ImportanceKind::WithinTypeVip && !has_mixed_types(data)) {
      r.warnings.push_back("within-type VIP requested but all predictors share one type");
    }
    for (std::size_t j = 0; j < p; ++j) {
      std::vector<double> reps;
      for (int t = 0; t < opts.num_rep; ++t) reps.push_back(scores[static_cast<std::size_t>(t)][k][j]);
      if (kinds[k] == ImportanceKind::Mi) {
        r.scores[j] = median(reps);
      } else {
        r.scores[j] = std::accumulate(reps.begin(), reps.end(), 0.0) / static_cast<double>(reps.size());
      }
      std::vector<double> nulls;
      for (int l = 0; l < opts.num_null; ++l) {
        nulls.push_back(scores[static_cast<std::size_t>(opts.num_rep + l)][k][j]);
      }
      r.thresholds[j] = permutation_threshold(std::move(nulls), opts.alpha);
      r.selected[j] = r.scores[j] > r.thresholds[j];
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

SelectionReport permutation_select(const Dataset& data, ImportanceKind kind, const PermutationOptions& opts,
                                   const SamplerConfig& cfg) {
  const ImportanceKind kinds[1] = {kind};
  return permutation_select(data, kinds, opts, cfg).front();
}

namespace {

struct Split {
  Dataset train;
  Dataset test;
};

Split random_split(const Dataset& data, double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(data.n())));
  if (n_train < 2) throw std::invalid_argument("split leaves fewer than 2 training observations");
  if (n_train >= data.n()) throw std::invalid_argument("split leaves the test set empty");
  std::vector<std::size_t> idx(data.n());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  return {data.select_rows(tr), data.select_rows(te)};
}

/// Test MSE for a continuous response, mean log loss for a binary one.
double test_loss(const Chain& chain, const Dataset& test) {
  const Prediction pred = predict(chain, test.x);
  double s = 0.0;
  if (chain.kind == ResponseKind::Binary) {
    for (std::size_t i = 0; i < test.n(); ++i) {
      const double pr = pred.prob_of_mean[i];
      s -= test.y[i] == 1.0 ? std::log(pr) : std::log1p(-pr);
    }
  } else {
    for (std::size_t i = 0; i < test.n(); ++i) s += (test.y[i] - pred.mean[i]) * (test.y[i] - pred.mean[i]);
  }
  return s / static_cast<double>(test.n());
}

struct CandidateResult {
  double loss = 0.0;
  double elpd = 0.0;
  double max_k = 0.0;
};

CandidateResult evaluate_subset(const Split& split, const std::vector<int>& cols, SamplerConfig c) {
  c.keep_trees = true;
  c.keep_train_fits = true;
  const Dataset train = split.train.select_columns(cols);
  const Dataset test = split.test.select_columns(cols);
  const Chain chain = fit(train, c);
  CandidateResult out;
  out.loss = test_loss(chain, test);
  const LooResult loo = elpd_loo(chain, train);
  out.elpd = loo.elpd_loo;
  out.max_k = 0.0;
  for (double k : loo.pareto_k) {
    if (std::isfinite(k)) out.max_k = std::max(out.max_k, k);
  }
  return out;
}

}  // namespace

SelectionReport backward_select(const Dataset& data, const BackwardOptions& opts, const SamplerConfig& cfg) {
  data.validate();
  const std::size_t p = data.p();
  if (p < 2) throw std::invalid_argument("backward_select: need at least 2 predictors");
  SelectionReport r = base_report(data, "backward", cfg);
  Rng split_rng(derive_seed(cfg.seed, {10}));
  const Split split = random_split(data, opts.split, split_rng);
  r.train_size = split.train.n();
  r.test_size = split.test.n();

  std::vector<int> current(p);
  std::iota(current.begin(), current.end(), 0);
  {
    SamplerConfig c = cfg;
    c.seed = derive_seed(cfg.seed, {11, 0});
    const CandidateResult full = evaluate_subset(split, current, c);
    r.trace.push_back({current, -1, full.loss, full.elpd, full.max_k});
    ++r.num_fits;
  }
  for (std::size_t step = 1; step < p; ++step) {
    std::vector<CandidateResult> results(current.size());
    parallel_for(current.size(), opts.threads, [&](std::size_t t) {
      std::vector<int> cols;
      for (int j : current) {
        if (j != current[t]) cols.push_back(j);
      }
      SamplerConfig c = cfg;
      // Shared seed: candidates differ only in their columns, which steadies
      // the comparison.
      c.seed = derive_seed(cfg.seed, {11, 0});
      results[t] = evaluate_subset(split, cols, c);
    });
    r.num_fits += current.size();
    // `current` is ascending, so the first minimum drops the smallest index.
    std::size_t best = 0;
    for (std::size_t t = 1; t < results.size(); ++t) {
      if (results[t].loss < results[best].loss) best = t;
    }
    const int dropped = current[best];
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(best));
    r.trace.push_back({current, dropped, results[best].loss, results[best].elpd, results[best].max_k});
  }

  std::size_t chosen = 0;
  for (std::size_t l = 1; l < r.trace.size(); ++l) {
    if (r.trace[l].elpd_loo > r.trace[chosen].elpd_loo) chosen = l;
  }
  r.chosen_step = static_cast<int>(chosen);
  for (int j : r.trace[chosen].predictors) r.selected[static_cast<std::size_t>(j)] = true;
  // Score: the last model size at which each predictor survived.
  for (const auto& s : r.trace) {
    for (int j : s.predictors) r.scores[static_cast<std::size_t>(j)] = 1.0 / static_cast<double>(s.predictors.size());
  }
  for (auto& t : r.thresholds) t = std::numeric_limits<double>::quiet_NaN();
  return r;
}

SelectionReport dart_select(const Dataset& data, const SamplerConfig& cfg, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("dart_select: threshold must lie in [0, 1]");
  SamplerConfig c = cfg;
  c.keep_trees = false;
  const Chain chain = fit_dart(data, c);
  SelectionReport r = base_report(data, "dart", cfg);
  r.scores = mpvip(chain).scores;
  r.num_fits = 1;
  for (std::size_t j = 0; j < data.p(); ++j) {
    r.thresholds[j] = threshold;
    r.selected[j] = r.scores[j] >= threshold && r.scores[j] > 0.0;
  }
  return r;
}

SelectionReport abc_forest_select(const Dataset& data, const AbcOptions& opts, const SamplerConfig& cfg) {
  if (opts.iterations < 10) throw std::invalid_argument("abc_forest_select: need at least 10 iterations");
  if (!(opts.keep_frac > 0.0 && opts.keep_frac < 1.0)) throw std::invalid_argument("abc_forest_select: keep_frac must lie in (0, 1)");
  if (!(opts.threshold > 0.0 && opts.threshold < 1.0)) throw std::invalid_argument("abc_forest_select: threshold must lie in (0, 1)");
  if (opts.burn < 0) throw std::invalid_argument("abc_forest_select: burn must be >= 0");
  const auto kept = static_cast<std::size_t>(std::floor(opts.keep_frac * opts.iterations));
  if (kept == 0) throw std::invalid_argument("abc_forest_select: keep_frac keeps no samples");
  data.validate();
  const std::size_t p = data.p();

  struct Sample {
    double loss = 0.0;
    std::vector<bool> in_subset;
    std::vector<bool> used;
  };
  std::vector<Sample> samples(static_cast<std::size_t>(opts.iterations));
  parallel_for(samples.size(), opts.threads, [&](std::size_t it) {
    Rng rng(derive_seed(cfg.seed, {20, it}));
    const Split split = random_split(data, opts.split, rng);
    std::vector<int> cols;
    while (cols.empty()) {
      const double theta = rng.beta(1.0, 1.0);
      for (std::size_t j = 0; j < p; ++j) {
        if (rng.bernoulli(theta)) cols.push_back(static_cast<int>(j));
      }
    }
    SamplerConfig c = cfg;
    c.n_burn = opts.burn;
    c.n_keep = 1;
    c.thin = 1;
    c.keep_trees = true;
    c.keep_train_fits = false;
    c.seed = derive_seed(cfg.seed, {21, it});
    const Dataset train = split.train.select_columns(cols);
    const Dataset test = split.test.select_columns(cols);
    const Chain chain = fit(train, c);
    Sample& s = samples[it];
    const double loss = test_loss(chain, test);
    s.loss = chain.kind == ResponseKind::Binary ? loss : std::sqrt(loss);
    s.in_subset.assign(p, false);
    s.used.assign(p, false);
    const auto& counts = chain.draws.back().split_counts;
    for (std::size_t c2 = 0; c2 < cols.size(); ++c2) {
      s.in_subset[static_cast<std::size_t>(cols[c2])] = true;
      s.used[static_cast<std::size_t>(cols[c2])] = counts[c2] >= 1;
    }
  });

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].loss < samples[b].loss; });

  SelectionReport r = base_report(data, "abc", cfg);
  r.subset_inclusion.assign(p, 0.0);
  r.abc_iterations = opts.iterations;
  r.abc_kept = static_cast<int>(kept);
  r.abc_loss_cutoff = samples[order[kept - 1]].loss;
  r.num_fits = samples.size();
  for (std::size_t t = 0; t < kept; ++t) {
    const Sample& s = samples[order[t]];
    for (std::size_t j = 0; j < p; ++j) {
      r.scores[j] += s.used[j] ? 1.0 : 0.0;
      r.subset_inclusion[j] += s.in_subset[j] ? 1.0 : 0.0;
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    r.scores[j] /= static_cast<double>(kept);
    r.subset_inclusion[j] /= static_cast<double>(kept);
    r.thresholds[j] = opts.threshold;
    r.selected[j] = r.scores[j] >= opts.threshold;
  }
  return r;
}

}  // namespace bartvs
