#include "bartvs/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace bartvs {

void SamplerConfig::validate() const {
  auto bad = [](const char* what) { throw std::invalid_argument(std::string("sampler config: ") + what); };
  if (num_trees < 1) bad("num_trees must be >= 1");
  if (n_burn < 0) bad("n_burn must be >= 0");
  if (n_keep < 1) bad("n_keep must be >= 1");
  if (thin < 1) bad("thin must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) bad("gamma must lie in (0, 1)");
  if (!(beta >= 0.0)) bad("beta must be >= 0");
  if (!(k > 0.0)) bad("k must be > 0");
  if (!(nu > 0.0)) bad("nu must be > 0");
  if (!(q > 0.0 && q < 1.0)) bad("q must lie in (0, 1)");
  if (num_cuts < 1 || num_cuts > 60000) bad("num_cuts must lie in [1, 60000]");
  if (!(dart.a > 0.0) || !(dart.b > 0.0)) bad("Dirichlet hyper-parameters must be > 0");
  if (!(dart.rho >= 0.0)) bad("Dirichlet rho must be >= 0");
  if (dart.fixed_theta && !(*dart.fixed_theta > 0.0)) bad("fixed concentration must be > 0");
}

double probit_probability(double latent) {
  static const double kHigh = std::nextafter(1.0, 0.0);
  const double p = 0.5 * std::erfc(-latent / std::sqrt(2.0));
  return std::clamp(p, std::numeric_limits<double>::min(), kHigh);
}

double error_variance_scale(double sd, double nu, double q) {
  const boost::math::chi_squared dist(nu);
  return sd * sd * boost::math::quantile(dist, 1.0 - q) / nu;
}

double sample_error_variance(double ssr, std::size_t n, double nu, double lambda, Rng& rng) {
  return (nu * lambda + ssr) / rng.chi_square(nu + static_cast<double>(n));
}

double sample_leaf_value(std::size_t count, double sum, double sigma2, double leaf_var, Rng& rng) {
  const double var = 1.0 / (1.0 / leaf_var + static_cast<double>(count) / sigma2);
  return var * sum / sigma2 + std::sqrt(var) * rng.normal();
}

double sample_dirichlet_concentration(double sum_log_s, std::size_t p, const DartConfig& cfg,
                                      Rng& rng) {
  constexpr int kGrid = 1000;
  const double dp = static_cast<double>(p);
  const double rho = cfg.rho > 0.0 ? cfg.rho : dp;
  std::vector<double> thetas(kGrid);
  std::vector<double> logw(kGrid);
  double max_w = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < kGrid; ++g) {
    const double lam = (g + 1.0) / (kGrid + 1.0);
    const double theta = lam * rho / (1.0 - lam);
    thetas[static_cast<std::size_t>(g)] = theta;
    const double lw = std::lgamma(theta) - dp * std::lgamma(theta / dp) + theta / dp * sum_log_s +
                      (cfg.a - 1.0) * std::log(lam) + (cfg.b - 1.0) * std::log1p(-lam);
    logw[static_cast<std::size_t>(g)] = lw;
    max_w = std::max(max_w, lw);
  }
  for (double& w : logw) w = std::exp(w - max_w);
  return thetas[rng.categorical(logw)];
}

namespace {

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

PriorCalibration calibrate(const Dataset& data, const SamplerConfig& cfg) {
  data.validate();
  const std::size_t n = data.n();
  if (n == 0) throw std::invalid_argument("calibrate: no observations");
  PriorCalibration cal;
  cal.grid = CutpointGrid::build(data, cfg.num_cuts);
  // Both sets are filled; the model kind picks which one it reads.
  const double ybar = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(n);
  const double lo = 0.5 / static_cast<double>(n);
  cal.offset = boost::math::quantile(boost::math::normal(), std::clamp(ybar, lo, 1.0 - lo));
  const auto [lo_it, hi_it] = std::minmax_element(data.y.begin(), data.y.end());
  const double range = *hi_it - *lo_it;
  cal.center = *lo_it + 0.5 * range;
  cal.scale = range > 0.0 ? range : 1.0;
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = (data.y[i] - cal.center) / cal.scale;
  cal.sd = sample_sd(target);
  if (!(cal.sd > 0.0)) cal.sd = 1.0;
  return cal;
}

namespace {

Chain run_chain(const Dataset& data, const SamplerConfig& cfg, bool probit, const IterationHook& hook) {
  cfg.validate();
  data.validate();
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (n < 2) throw std::invalid_argument("fit: need at least 2 observations");
  if (p == 0) throw std::invalid_argument("fit: need at least 1 predictor");

  Chain chain;
  chain.config = cfg;
  chain.kind = probit ? ResponseKind::Binary : ResponseKind::Continuous;
  chain.num_predictors = p;
  chain.types = data.types;
  chain.names = data.names.empty() ? default_names(p) : data.names;
  chain.fingerprint = data.fingerprint();

  const PriorCalibration cal = cfg.calibration ? *cfg.calibration : calibrate(data, cfg);
  if (cal.grid.num_predictors() != p) throw std::invalid_argument("fit: calibration grid does not match predictors");
  BinnedPredictors binned(data.x, cal.grid);
  Rng rng(cfg.seed);
  const int num_trees = cfg.num_trees;
  const double sqrt_m = std::sqrt(static_cast<double>(num_trees));

  std::vector<double> target(n);
  std::vector<double> latents;
  TreePrior prior{cfg.gamma, cfg.beta, 0.0};
  double sigma2 = 1.0;
  double lambda = 0.0;
  if (probit) {
    chain.offset = cal.offset;
    prior.leaf_sd = 3.0 / (cfg.k * sqrt_m);
    latents.assign(n, 0.0);
    // Latents start at the offset so the first residuals are zero.
    std::fill(target.begin(), target.end(), 0.0);
  } else {
    chain.center = cal.center;
    chain.scale = cal.scale;
    for (std::size_t i = 0; i < n; ++i) target[i] = (data.y[i] - chain.center) / chain.scale;
    sigma2 = cal.sd * cal.sd;
    lambda = error_variance_scale(cal.sd, cfg.nu, cfg.q);
    prior.leaf_sd = 0.5 / (cfg.k * sqrt_m);
  }
  const double leaf_var = prior.leaf_sd * prior.leaf_sd;

  std::vector<Tree> trees(static_cast<std::size_t>(num_trees), Tree(p, 0.0));
  std::vector<NodeMembership> members;
  members.reserve(trees.size());
  for (const Tree& t : trees) members.emplace_back(t, binned);
  std::vector<double> tree_fit(static_cast<std::size_t>(num_trees) * n, 0.0);
  std::vector<double> residual = target;

  const bool dart = cfg.dart.enabled;
  const int dart_start = cfg.dart.start < 0 ? cfg.n_burn / 2 : cfg.dart.start;
  std::vector<double> split_probs;
  double theta = 0.0;
  if (dart) {
    split_probs.assign(p, 1.0 / static_cast<double>(p));
    theta = cfg.dart.fixed_theta ? *cfg.dart.fixed_theta
                                 : (cfg.dart.rho > 0.0 ? cfg.dart.rho : static_cast<double>(p));
  }

  const int total = cfg.n_burn + cfg.n_keep * cfg.thin;
  chain.draws.reserve(static_cast<std::size_t>(cfg.n_keep));
  chain.train_mean.assign(n, 0.0);
  BirthPartition partition;
  std::vector<int> counts(p);
  std::vector<double> sums(p);

  for (int it = 0; it < total; ++it) {
    if (probit) {
      for (std::size_t i = 0; i < n; ++i) {
        const double f = target[i] - residual[i] + chain.offset;
        const double z = data.y[i] == 1.0 ? f + rng.truncated_normal_above(-f)
                                          : f - rng.truncated_normal_above(f);
        latents[i] = z;
        const double t = z - chain.offset;
        residual[i] += t - target[i];
        target[i] = t;
      }
    }

    for (int m = 0; m < num_trees; ++m) {
      Tree& tree = trees[static_cast<std::size_t>(m)];
      NodeMembership& memb = members[static_cast<std::size_t>(m)];
      double* fit_m = tree_fit.data() + static_cast<std::size_t>(m) * n;
      for (std::size_t i = 0; i < n; ++i) residual[i] += fit_m[i];

      const double p_birth = birth_move_probability(tree, memb.num_growable());
      if (rng.uniform() < p_birth) {
        auto prop = propose_birth(tree, memb, binned, rng, dart ? std::span<const double>(split_probs)
                                                               : std::span<const double>());
        if (prop) {
          const BirthRatio ratio = birth_ratio_components(tree, memb, binned, *prop, residual, sigma2,
                                                          prior, &partition);
          const double accept = metropolis_acceptance_log(ratio.log_r);
          if (rng.uniform() < accept) {
            const auto [l, r] = tree.grow(prop->leaf, prop->rule, accept);
            memb.apply_grow(prop->leaf, l, r, std::move(partition));
            ++chain.births_accepted;
          }
        }
      } else if (tree.num_terminal() > 1) {
        auto prop = propose_death(tree, rng);
        if (prop) {
          const double log_r = death_log_ratio(tree, memb, binned, *prop, residual, sigma2, prior);
          if (rng.uniform() < metropolis_acceptance_log(log_r)) {
            const Node& nd = tree.node(prop->node);
            memb.apply_prune(prop->node, nd.left, nd.right, binned);
            tree.prune(prop->node);
            ++chain.deaths_accepted;
          }
        }
      }

      for (NodeId leaf : tree.terminal_nodes()) {
        auto rows = memb.members(leaf);
        double s = 0.0;
        for (std::uint32_t i : rows) s += residual[i];
        const double mu = sample_leaf_value(rows.size(), s, sigma2, leaf_var, rng);
        tree.set_mu(leaf, mu);
        for (std::uint32_t i : rows) {
          fit_m[i] = mu;
          residual[i] -= mu;
        }
      }
    }

    if (!probit) {
      double ssr = 0.0;
      for (double r : residual) ssr += r * r;
      sigma2 = sample_error_variance(ssr, n, cfg.nu, lambda, rng);
    }

    if (dart && it >= dart_start) {
      std::fill(counts.begin(), counts.end(), 0);
      for (const Tree& t : trees) t.accumulate_splits(counts, {});
      std::vector<double> alpha(p);
      for (std::size_t j = 0; j < p; ++j) alpha[j] = theta / static_cast<double>(p) + counts[j];
      split_probs = rng.dirichlet(alpha);
      if (!cfg.dart.fixed_theta) {
        double sum_log = 0.0;
        for (double s : split_probs) sum_log += std::log(s);
        theta = sample_dirichlet_concentration(sum_log, p, cfg.dart, rng);
      }
    }

    if (hook) {
      IterationView view;
      view.iteration = it;
      view.target = target;
      view.residual = residual;
      view.latents = latents;
      view.sigma2 = sigma2;
      view.trees = &trees;
      hook(view);
    }

    const int post = it - cfg.n_burn;
    if (post < 0 || (post + 1) % cfg.thin != 0) continue;

    PosteriorDraw draw;
    if (cfg.keep_trees) draw.trees = trees;
    draw.sigma = probit ? 1.0 : std::sqrt(sigma2) * chain.scale;
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (const Tree& t : trees) {
      t.accumulate_splits(counts, sums);
      draw.num_internal += t.num_internal();
    }
    draw.split_counts = counts;
    draw.accept_sums = sums;
    if (dart) {
      draw.split_probs = split_probs;
      draw.theta = theta;
    }
    std::vector<double> fit_now(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double f = target[i] - residual[i];
      fit_now[i] = probit ? f + chain.offset : f * chain.scale + chain.center;
      chain.train_mean[i] += fit_now[i];
    }
    if (cfg.keep_train_fits) draw.train_fit = std::move(fit_now);
    chain.draws.push_back(std::move(draw));
  }
  for (double& v : chain.train_mean) v /= static_cast<double>(chain.draws.size());
  return chain;
}

}  // namespace

Chain fit_continuous(const Dataset& data, const SamplerConfig& cfg, const IterationHook& hook) {
  if (data.response != ResponseKind::Continuous) {
    throw std::invalid_argument("fit_continuous: dataset has a binary response");
  }
  return run_chain(data, cfg, false, hook);
}

Chain fit_probit(const Dataset& data, const SamplerConfig& cfg, const IterationHook& hook) {
  if (!is_binary_response(data.y)) throw std::invalid_argument("fit_probit: response must be 0/1");
  return run_chain(data, cfg, true, hook);
}

Chain fit_dart(const Dataset& data, SamplerConfig cfg, const IterationHook& hook) {
  cfg.dart.enabled = true;
  return fit(data, cfg, hook);
}

Chain fit(const Dataset& data, const SamplerConfig& cfg, const IterationHook& hook) {
  return data.response == ResponseKind::Binary ? fit_probit(data, cfg, hook)
                                               : fit_continuous(data, cfg, hook);
}

Prediction predict(const Chain& chain, const Matrix& x) {
  if (x.cols() != chain.num_predictors) {
    throw std::invalid_argument("predict: expected " + std::to_string(chain.num_predictors) +
                                " predictors, got " + std::to_string(x.cols()));
  }
  if (chain.draws.empty()) throw std::invalid_argument("predict: chain has no draws");
  for (const auto& d : chain.draws) {
    if (d.trees.size() != static_cast<std::size_t>(chain.config.num_trees)) {
      throw std::invalid_argument("predict: chain was fitted without keeping trees");
    }
  }
  const std::size_t n = x.rows();
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = x.row(i);

  const bool probit = chain.kind == ResponseKind::Binary;
  Prediction out;
  out.draws.reserve(chain.draws.size());
  out.mean.assign(n, 0.0);
  for (const auto& d : chain.draws) {
    std::vector<double> f(n, 0.0);
    for (const Tree& t : d.trees) {
      for (std::size_t i = 0; i < n; ++i) f[i] += t.evaluate(rows[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = probit ? f[i] + chain.offset : f[i] * chain.scale + chain.center;
      out.mean[i] += f[i];
    }
    out.draws.push_back(std::move(f));
  }
  const double k = static_cast<double>(chain.draws.size());
  for (double& v : out.mean) v /= k;
  if (probit) {
    out.mean_prob.assign(n, 0.0);
    out.prob_of_mean.resize(n);
    for (const auto& f : out.draws) {
      std::vector<double> pr(n);
      for (std::size_t i = 0; i < n; ++i) {
        pr[i] = probit_probability(f[i]);
        out.mean_prob[i] += pr[i];
      }
      out.prob_draws.push_back(std::move(pr));
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.mean_prob[i] /= k;
      out.prob_of_mean[i] = probit_probability(out.mean[i]);
    }
  }
  return out;
}

}  // namespace bartvs
