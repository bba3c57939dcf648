#include "bartvs/loo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace bartvs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

double GeneralizedPareto::quantile(double prob) const {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-prob);
  return sigma * std::expm1(-k * std::log1p(-prob)) / k;
}

GeneralizedPareto fit_generalized_pareto(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("fit_generalized_pareto: need at least 2 values");
  constexpr double kPrior = 3.0;
  const std::size_t grid = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const double xstar = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  const double xmax = x[n - 1];
  if (!(xmax > 0.0) || !(xstar > 0.0)) throw std::invalid_argument("fit_generalized_pareto: values must be positive");

  std::vector<double> theta(grid);
  std::vector<double> loglik(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    theta[j] = 1.0 / xmax + (1.0 - std::sqrt(grid / (j + 0.5))) / kPrior / xstar;
    double kk = 0.0;
    for (double v : x) kk += std::log1p(-theta[j] * v);
    kk /= static_cast<double>(n);
    loglik[j] = static_cast<double>(n) * (std::log(-theta[j] / kk) - kk - 1.0);
  }
  const double lse = log_sum_exp(loglik);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < grid; ++j) theta_hat += theta[j] * std::exp(loglik[j] - lse);

  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= static_cast<double>(n);
  GeneralizedPareto out;
  out.sigma = -k / theta_hat;
  // Weakly informative prior centred at 0.5 with the weight of 10 observations.
  constexpr double kWeight = 10.0;
  out.k = k * n / (n + kWeight) + kWeight * 0.5 / (n + kWeight);
  if (std::isnan(out.k)) out.k = std::numeric_limits<double>::infinity();
  return out;
}

std::size_t psis_tail_length(std::size_t num_draws) {
  const double s = static_cast<double>(num_draws);
  return static_cast<std::size_t>(std::ceil(std::min(0.2 * s, 3.0 * std::sqrt(s))));
}

PsisResult psis_smooth(std::span<const double> log_ratios) {
  const std::size_t s = log_ratios.size();
  if (s == 0) throw std::invalid_argument("psis_smooth: no ratios");
  for (double v : log_ratios) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("psis_smooth: log ratios must be < +inf and not NaN");
    }
  }
  std::vector<double> lw(log_ratios.begin(), log_ratios.end());
  const double mx = *std::max_element(lw.begin(), lw.end());
  for (double& v : lw) v -= mx;

  PsisResult out;
  out.pareto_k = kNaN;
  const bool all_equal = std::all_of(lw.begin(), lw.end(), [&](double v) { return v == lw[0]; });
  const std::size_t tail = psis_tail_length(s);
  if (s >= 5 && !all_equal && tail >= 5 && tail < s) {
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lw[a] < lw[b]; });
    const double cutoff = lw[order[s - tail - 1]];
    const double tail_max = lw[order[s - 1]];
    const double tail_min = lw[order[s - tail]];
    if (tail_max - tail_min > std::numeric_limits<double>::epsilon() / 100.0) {
      const double exp_cutoff = std::exp(cutoff);
      std::vector<double> exceed(tail);
      for (std::size_t t = 0; t < tail; ++t) exceed[t] = std::exp(lw[order[s - tail + t]]) - exp_cutoff;
      // Ties at the cutoff give zero exceedances; the fit needs positive values.
      if (exceed.front() <= 0.0) {
        const double floor = std::max(exceed.back() * 1e-12, std::numeric_limits<double>::min());
        for (double& e : exceed) e = std::max(e, floor);
      }
      const GeneralizedPareto gp = fit_generalized_pareto(exceed);
      out.pareto_k = gp.k;
      if (std::isfinite(gp.k)) {
        for (std::size_t t = 0; t < tail; ++t) {
          const double q = gp.quantile((t + 0.5) / static_cast<double>(tail)) + exp_cutoff;
          lw[order[s - tail + t]] = std::min(std::log(q), 0.0);
        }
      }
    }
  }
  const double total = log_sum_exp(lw);
  out.weights.resize(s);
  for (std::size_t i = 0; i < s; ++i) out.weights[i] = std::exp(lw[i] - total);
  return out;
}

double relative_efficiency(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) return 1.0;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) return 1.0;
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (series[t] - mean) * (series[t + lag] - mean);
    return s / (static_cast<double>(n) * var);
  };
  // Sum autocorrelation pairs while they stay positive.
  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = rho(lag) + rho(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0);
  return 1.0 / tau;
}

LooResult loo_from_log_lik(const std::vector<std::vector<double>>& log_lik) {
  const std::size_t k = log_lik.size();
  if (k == 0) throw std::invalid_argument("loo: no draws");
  const std::size_t n = log_lik[0].size();
  for (const auto& row : log_lik) {
    if (row.size() != n) throw std::invalid_argument("loo: ragged log-likelihood table");
  }
  LooResult out;
  out.pointwise.resize(n);
  out.pareto_k.resize(n);
  out.pointwise_se.resize(n);
  std::vector<double> ll(k);
  std::vector<double> neg(k);
  std::vector<double> terms(k);
  std::vector<double> lik(k);
  double var_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < k; ++d) {
      ll[d] = log_lik[d][i];
      if (!std::isfinite(ll[d])) throw std::invalid_argument("loo: non-finite log-likelihood");
      neg[d] = -ll[d];
    }
    const PsisResult psis = psis_smooth(neg);
    for (std::size_t d = 0; d < k; ++d) terms[d] = std::log(psis.weights[d]) + ll[d];
    const double lp = log_sum_exp(terms);
    out.pointwise[i] = lp;
    out.pareto_k[i] = psis.pareto_k;
    double v = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
      lik[d] = std::exp(ll[d] - lp);
      const double dev = lik[d] - 1.0;
      v += psis.weights[d] * psis.weights[d] * dev * dev;
    }
    v /= relative_efficiency(lik);
    out.pointwise_se[i] = std::sqrt(v);
    var_total += v;
  }
  out.elpd_loo = std::accumulate(out.pointwise.begin(), out.pointwise.end(), 0.0);
  out.mc_se = std::sqrt(var_total);
  return out;
}

namespace {

std::vector<std::vector<double>> fits_on(const Chain& chain, const Dataset& data) {
  if (data.n() == 0) throw std::invalid_argument("loo: empty dataset");
  const bool have_train = !chain.draws.empty() &&
                          std::all_of(chain.draws.begin(), chain.draws.end(), [&](const PosteriorDraw& d) {
                            return d.train_fit.size() == data.n();
                          });
  if (have_train && data.fingerprint() == chain.fingerprint) {
    std::vector<std::vector<double>> out;
    out.reserve(chain.draws.size());
    for (const auto& d : chain.draws) out.push_back(d.train_fit);
    return out;
  }
  return predict(chain, data.x).draws;
}

double gaussian_log_density(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * z * z;
}

double bernoulli_log_density(double y, double latent) {
  const double p = probit_probability(latent);
  return y == 1.0 ? std::log(p) : std::log1p(-p);
}

}  // namespace

std::vector<std::vector<double>> gaussian_log_lik(const Chain& chain, const Dataset& data,
                                                  std::optional<double> sigma_override) {
  if (chain.kind != ResponseKind::Continuous) throw std::invalid_argument("gaussian_log_lik: chain is not continuous");
  const auto fits = fits_on(chain, data);
  std::vector<std::vector<double>> out(fits.size(), std::vector<double>(data.n()));
  for (std::size_t d = 0; d < fits.size(); ++d) {
    const double sd = sigma_override ? *sigma_override : chain.draws[d].sigma;
    for (std::size_t i = 0; i < data.n(); ++i) out[d][i] = gaussian_log_density(data.y[i], fits[d][i], sd);
  }
  return out;
}

std::vector<std::vector<double>> bernoulli_log_lik(const Chain& chain, const Dataset& data) {
  if (chain.kind != ResponseKind::Binary) throw std::invalid_argument("bernoulli_log_lik: chain is not probit");
  if (!is_binary_response(data.y)) throw std::invalid_argument("bernoulli_log_lik: response must be 0/1");
  const auto fits = fits_on(chain, data);
  std::vector<std::vector<double>> out(fits.size(), std::vector<double>(data.n()));
  for (std::size_t d = 0; d < fits.size(); ++d) {
    for (std::size_t i = 0; i < data.n(); ++i) out[d][i] = bernoulli_log_density(data.y[i], fits[d][i]);
  }
  return out;
}

LooResult elpd_loo_gaussian(const Chain& chain, const Dataset& data, const LooOptions& opts) {
  return loo_from_log_lik(gaussian_log_lik(chain, data, opts.sigma_override));
}

LooResult elpd_loo_bernoulli(const Chain& chain, const Dataset& data) {
  return loo_from_log_lik(bernoulli_log_lik(chain, data));
}

LooResult elpd_loo(const Chain& chain, const Dataset& data) {
  return chain.kind == ResponseKind::Binary ? elpd_loo_bernoulli(chain, data) : elpd_loo_gaussian(chain, data);
}

LooResult exact_loo_oracle(const Dataset& data, const SamplerConfig& cfg, std::size_t max_n) {
  const std::size_t n = data.n();
  if (n < 2) throw std::invalid_argument("exact_loo_oracle: need at least 2 observations");
  if (n > max_n) {
    throw std::invalid_argument("exact_loo_oracle: n = " + std::to_string(n) + " exceeds the refit budget of " +
                                std::to_string(max_n));
  }
  LooResult out;
  out.pointwise.resize(n);
  out.pareto_k.assign(n, kNaN);
  out.pointwise_se.resize(n);
  double var_total = 0.0;
  // Every refit shares the full-data prior, so each held-out term targets the
  // same model the importance-sampling estimate approximates.
  SamplerConfig base = cfg;
  if (!base.calibration) base.calibration = calibrate(data, cfg);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < n; ++r) {
      if (r != i) keep.push_back(r);
    }
    const std::size_t held[1] = {i};
    const Dataset train = data.select_rows(keep);
    const Dataset test = data.select_rows(held);
    SamplerConfig c = base;
    c.seed = derive_seed(cfg.seed, {i});
    c.keep_trees = true;
    const Chain chain = fit(train, c);
    const auto ll = chain.kind == ResponseKind::Binary ? bernoulli_log_lik(chain, test) : gaussian_log_lik(chain, test);
    std::vector<double> col(ll.size());
    for (std::size_t d = 0; d < ll.size(); ++d) col[d] = ll[d][0];
    const double lp = log_sum_exp(col) - std::log(static_cast<double>(col.size()));
    out.pointwise[i] = lp;
    std::vector<double> lik(col.size());
    double v = 0.0;
    for (std::size_t d = 0; d < col.size(); ++d) {
      lik[d] = std::exp(col[d] - lp);
      v += (lik[d] - 1.0) * (lik[d] - 1.0);
    }
    const double k = static_cast<double>(col.size());
    v = k > 1 ? v / (k - 1.0) / k / relative_efficiency(lik) : 0.0;
    out.pointwise_se[i] = std::sqrt(v);
    var_total += v;
  }
  out.elpd_loo = std::accumulate(out.pointwise.begin(), out.pointwise.end(), 0.0);
  out.mc_se = std::sqrt(var_total);
  return out;
}

}  // namespace bartvs
