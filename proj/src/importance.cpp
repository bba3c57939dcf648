#include "bartvs/importance.hpp"

#include <cmath>
#include <stdexcept>

namespace bartvs {

const char* to_string(ImportanceKind kind) {
  switch (kind) {
    case ImportanceKind::Vip: return "vip";
    case ImportanceKind::VipApprox: return "vip_approx";
    case ImportanceKind::WithinTypeVip: return "within_type_vip";
    case ImportanceKind::Mi: return "mi";
    case ImportanceKind::Mpvip: return "mpvip";
  }
  return "unknown";
}

std::optional<ImportanceKind> parse_importance_kind(std::string_view name) {
  for (auto k : {ImportanceKind::Vip, ImportanceKind::VipApprox, ImportanceKind::WithinTypeVip,
                 ImportanceKind::Mi, ImportanceKind::Mpvip}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

namespace {

ImportanceReport start_report(const Chain& chain, ImportanceKind kind) {
  if (chain.draws.empty()) throw std::invalid_argument("importance: chain has no draws");
  ImportanceReport out;
  out.kind = kind;
  out.scores.assign(chain.num_predictors, 0.0);
  out.types = chain.types;
  out.names = chain.names;
  out.num_draws = chain.draws.size();
  out.fingerprint = chain.fingerprint;
  for (const auto& d : chain.draws) {
    if (d.split_counts.size() != chain.num_predictors) {
      throw std::invalid_argument("importance: split counts do not match predictor count");
    }
  }
  return out;
}

double draw_total(const PosteriorDraw& d) {
  double t = 0.0;
  for (int c : d.split_counts) t += c;
  return t;
}

}  // namespace

ImportanceReport vip(const Chain& chain) {
  ImportanceReport out = start_report(chain, ImportanceKind::Vip);
  const std::size_t p = chain.num_predictors;
  for (const auto& d : chain.draws) {
    const double total = draw_total(d);
    for (std::size_t j = 0; j < p; ++j) {
      out.scores[j] += total > 0.0 ? d.split_counts[j] / total : 1.0 / static_cast<double>(p);
    }
  }
  for (double& s : out.scores) s /= static_cast<double>(chain.draws.size());
  return out;
}

ImportanceReport vip_approx(const Chain& chain) {
  ImportanceReport out = start_report(chain, ImportanceKind::VipApprox);
  double total = 0.0;
  for (const auto& d : chain.draws) {
    for (std::size_t j = 0; j < chain.num_predictors; ++j) out.scores[j] += d.split_counts[j];
    total += draw_total(d);
  }
  if (!(total > 0.0)) throw std::invalid_argument("vip_approx: chain has no splits");
  for (double& s : out.scores) s /= total;
  return out;
}

LemmaCheck lemma_bound_check(const Chain& chain) {
  if (chain.draws.empty()) throw std::invalid_argument("lemma_bound_check: chain has no draws");
  const std::size_t p = chain.num_predictors;
  const double k = static_cast<double>(chain.draws.size());
  std::vector<double> totals;
  for (const auto& d : chain.draws) {
    totals.push_back(draw_total(d));
    if (!(totals.back() > 0.0)) throw std::invalid_argument("lemma_bound_check: draw without splits");
  }
  double mean = 0.0;
  for (double t : totals) mean += t;
  mean /= k;
  double var = 0.0;
  for (double t : totals) var += (t - mean) * (t - mean);
  var /= k;

  LemmaCheck out;
  out.delta2 = std::sqrt(var) / mean;
  out.delta1.assign(p, 0.0);
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double share = chain.draws[i].split_counts[j] / totals[i];
      out.delta1[j] += share * share;
    }
  }
  const auto exact = vip(chain).scores;
  const auto pooled = vip_approx(chain).scores;
  for (std::size_t j = 0; j < p; ++j) {
    out.delta1[j] /= k;
    out.gap.push_back(std::abs(pooled[j] - exact[j]));
    out.bound.push_back(std::sqrt(out.delta1[j]) * out.delta2);
    if (out.gap[j] > out.bound[j] + 1e-12) {
      throw std::logic_error("lemma_bound_check: bound violated for predictor " + std::to_string(j));
    }
  }
  return out;
}

ImportanceReport within_type_vip(const Chain& chain, std::span<const PredictorType> types) {
  ImportanceReport out = start_report(chain, ImportanceKind::WithinTypeVip);
  const std::size_t p = chain.num_predictors;
  if (types.size() != p) throw std::invalid_argument("within_type_vip: type tags missing");
  out.types.assign(types.begin(), types.end());
  for (const auto& d : chain.draws) {
    double by_type[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < p; ++j) by_type[types[j] == PredictorType::Binary] += d.split_counts[j];
    for (std::size_t j = 0; j < p; ++j) {
      const double denom = by_type[types[j] == PredictorType::Binary];
      if (denom > 0.0) out.scores[j] += d.split_counts[j] / denom;
    }
  }
  for (double& s : out.scores) s /= static_cast<double>(chain.draws.size());
  return out;
}

ImportanceReport within_type_vip(const Chain& chain) { return within_type_vip(chain, chain.types); }

ImportanceReport metropolis_importance(const Chain& chain) {
  ImportanceReport out = start_report(chain, ImportanceKind::Mi);
  const std::size_t p = chain.num_predictors;
  std::vector<double> avg(p);
  for (std::size_t k = 0; k < chain.draws.size(); ++k) {
    const auto& d = chain.draws[k];
    if (d.accept_sums.size() != p) throw std::invalid_argument("metropolis_importance: missing acceptance sums");
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      avg[j] = d.split_counts[j] > 0 ? d.accept_sums[j] / d.split_counts[j] : 0.0;
      total += avg[j];
    }
    if (!(total > 0.0)) {
      throw std::domain_error("metropolis_importance: draw " + std::to_string(k) +
                              " has no accepted splits");
    }
    for (std::size_t j = 0; j < p; ++j) out.scores[j] += avg[j] / total;
  }
  for (double& s : out.scores) s /= static_cast<double>(chain.draws.size());
  return out;
}

ImportanceReport mpvip(const Chain& chain) {
  ImportanceReport out = start_report(chain, ImportanceKind::Mpvip);
  for (const auto& d : chain.draws) {
    for (std::size_t j = 0; j < chain.num_predictors; ++j) out.scores[j] += d.split_counts[j] >= 1 ? 1.0 : 0.0;
  }
  for (double& s : out.scores) s /= static_cast<double>(chain.draws.size());
  return out;
}

ImportanceReport importance(const Chain& chain, ImportanceKind kind) {
  switch (kind) {
    case ImportanceKind::Vip: return vip(chain);
    case ImportanceKind::VipApprox: return vip_approx(chain);
    case ImportanceKind::WithinTypeVip: return within_type_vip(chain);
    case ImportanceKind::Mi: return metropolis_importance(chain);
    case ImportanceKind::Mpvip: return mpvip(chain);
  }
  throw std::invalid_argument("importance: unknown kind");
}

NestedVariances nested_variances(const ScoreTensor& scores) {
  const std::size_t nd = scores.size();
  if (nd < 2) throw std::invalid_argument("nested_variances: need at least 2 datasets");
  const std::size_t np = scores[0].size();
  if (np < 2) throw std::invalid_argument("nested_variances: need at least 2 predictors");
  const std::size_t nr = scores[0][0].size();
  if (nr < 2) throw std::invalid_argument("nested_variances: need at least 2 repetitions");
  for (const auto& ds : scores) {
    if (ds.size() != np) throw std::invalid_argument("nested_variances: ragged predictor dimension");
    for (const auto& reps : ds) {
      if (reps.size() != nr) throw std::invalid_argument("nested_variances: ragged repetition dimension");
    }
  }

  NestedVariances out;
  out.within.assign(nd, std::vector<double>(np, 0.0));
  std::vector<std::vector<double>> rep_mean(nd, std::vector<double>(np, 0.0));
  for (std::size_t i = 0; i < nd; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      double m = 0.0;
      for (double v : scores[i][j]) m += v;
      m /= static_cast<double>(nr);
      rep_mean[i][j] = m;
      double ss = 0.0;
      for (double v : scores[i][j]) ss += (v - m) * (v - m);
      out.within[i][j] = ss / static_cast<double>(nr - 1);
    }
  }
  std::vector<double> grand(np, 0.0);
  out.across_datasets.assign(np, 0.0);
  for (std::size_t j = 0; j < np; ++j) {
    for (std::size_t i = 0; i < nd; ++i) grand[j] += rep_mean[i][j];
    grand[j] /= static_cast<double>(nd);
    double ss = 0.0;
    for (std::size_t i = 0; i < nd; ++i) ss += (rep_mean[i][j] - grand[j]) * (rep_mean[i][j] - grand[j]);
    out.across_datasets[j] = ss / static_cast<double>(nd - 1);
  }
  double overall = 0.0;
  for (double g : grand) overall += g;
  overall /= static_cast<double>(np);
  double ss = 0.0;
  for (double g : grand) ss += (g - overall) * (g - overall);
  out.across_predictors = ss / static_cast<double>(np - 1);
  return out;
}

}  // namespace bartvs
