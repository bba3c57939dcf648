#include "bartvs/simbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "bartvs/parallel.hpp"

namespace bartvs {

namespace {

constexpr ScenarioId kAllScenarios[] = {ScenarioId::CC1, ScenarioId::CC2, ScenarioId::CM1, ScenarioId::CM2,
                                        ScenarioId::BC1, ScenarioId::BC2, ScenarioId::BM1, ScenarioId::BM2,
                                        ScenarioId::EX1, ScenarioId::EX2};

// Population means of the mean functions; binary scenarios subtract them so
// that both classes occur.
constexpr double kFriedmanMean = 14.413297342419856;
constexpr double kProductMean = 0.108;
constexpr double kMixedMean = -5.419776237923296;

enum class Family { Friedman, Product, MixedFriedman, Mixed, Example1, Example2 };

Family family_of(ScenarioId id) {
  switch (id) {
    case ScenarioId::CC1:
    case ScenarioId::BC1: return Family::Friedman;
    case ScenarioId::CC2:
    case ScenarioId::BC2: return Family::Product;
    case ScenarioId::CM1:
    case ScenarioId::BM1: return Family::MixedFriedman;
    case ScenarioId::CM2:
    case ScenarioId::BM2: return Family::Mixed;
    case ScenarioId::EX1: return Family::Example1;
    case ScenarioId::EX2: return Family::Example2;
  }
  throw std::invalid_argument("unknown scenario");
}

std::size_t half(std::size_t p) { return (p + 1) / 2; }

}  // namespace

const char* to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::CC1: return "CC1";
    case ScenarioId::CC2: return "CC2";
    case ScenarioId::CM1: return "CM1";
    case ScenarioId::CM2: return "CM2";
    case ScenarioId::BC1: return "BC1";
    case ScenarioId::BC2: return "BC2";
    case ScenarioId::BM1: return "BM1";
    case ScenarioId::BM2: return "BM2";
    case ScenarioId::EX1: return "EX1";
    case ScenarioId::EX2: return "EX2";
  }
  return "unknown";
}

std::optional<ScenarioId> parse_scenario(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c != '.') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  for (ScenarioId id : kAllScenarios) {
    if (key == to_string(id)) return id;
  }
  return std::nullopt;
}

bool has_binary_response(ScenarioId id) {
  return id == ScenarioId::BC1 || id == ScenarioId::BC2 || id == ScenarioId::BM1 || id == ScenarioId::BM2;
}

ScenarioSpec resolve(ScenarioSpec spec) {
  const Family fam = family_of(spec.id);
  const std::string name = to_string(spec.id);
  if (spec.n < 2) throw std::invalid_argument(name + ": n must be at least 2");
  if (!(spec.sigma2 >= 0.0) || !std::isfinite(spec.sigma2)) throw std::invalid_argument(name + ": sigma2 must be >= 0");
  std::size_t fixed = 0;
  std::size_t minimum = 0;
  switch (fam) {
    case Family::Friedman: minimum = 5; break;
    case Family::Product: minimum = 10; break;
    case Family::MixedFriedman: minimum = 6; break;
    case Family::Mixed: fixed = 84; break;
    case Family::Example1:
    case Family::Example2: fixed = 20; break;
  }
  if (fixed != 0) {
    if (spec.p == 0) spec.p = fixed;
    if (spec.p != fixed) {
      throw std::invalid_argument(name + ": p is fixed at " + std::to_string(fixed) + ", got " + std::to_string(spec.p));
    }
  } else {
    if (spec.p == 0) spec.p = 50;
    if (spec.p < minimum) {
      throw std::invalid_argument(name + ": p must be at least " + std::to_string(minimum) +
                                  " to hold the relevant predictors");
    }
  }
  return spec;
}

std::vector<int> relevant_set(ScenarioId id, std::size_t p) {
  switch (family_of(id)) {
    case Family::Friedman: return {0, 1, 2, 3, 4};
    case Family::Product: return {0, 3, 6, 9};
    case Family::MixedFriedman: {
      const int h = static_cast<int>(half(p));
      return {0, 1, h, h + 1, h + 2};
    }
    case Family::Mixed: return {0, 20, 40, 41, 42, 43};
    case Family::Example1:
    case Family::Example2: return {0, 1, 10, 11, 12};
  }
  return {};
}

double scenario_mean(ScenarioId id, std::span<const double> x) {
  constexpr double pi = std::numbers::pi;
  double f = 0.0;
  double shift = 0.0;
  switch (family_of(id)) {
    case Family::Friedman:
      f = 10 * std::sin(pi * x[0] * x[1]) + 20 * (x[2] - 0.5) * (x[2] - 0.5) + 10 * x[3] + 5 * x[4];
      shift = kFriedmanMean;
      break;
    case Family::Product:
      f = 2 * x[0] * x[3] + 2 * x[6] * x[9];
      shift = kProductMean;
      break;
    case Family::MixedFriedman: {
      const std::size_t h = half(x.size());
      f = 10 * std::sin(pi * x[h] * x[h + 1]) + 20 * (x[h + 2] - 0.5) * (x[h + 2] - 0.5) + 10 * x[0] + 5 * x[1];
      shift = kFriedmanMean;
      break;
    }
    case Family::Mixed:
      f = -4 + x[0] + std::sin(pi * x[0] * x[43]) - x[20] + 0.6 * x[40] * x[41] -
          std::exp(-2 * (x[41] + 1) * (x[41] + 1)) - x[42] * x[42] + 0.5 * x[43];
      shift = kMixedMean;
      break;
    case Family::Example1:
      f = 10 * std::sin(pi * x[0] * x[10]) + 20 * (x[12] - 0.5) * (x[12] - 0.5) + 10 * x[1] + 5 * x[11];
      break;
    case Family::Example2:
      f = 10 * std::sin(pi * x[10] * x[11]) + 20 * (x[12] - 0.5) * (x[12] - 0.5) + 10 * x[0] + 5 * x[1];
      break;
  }
  return has_binary_response(id) ? f - shift : f;
}

Dataset gen_scenario(const ScenarioSpec& raw, Rng& rng) {
  const ScenarioSpec spec = resolve(raw);
  const std::size_t n = spec.n;
  const std::size_t p = spec.p;
  Dataset d;
  d.x = Matrix(n, p);
  d.types.assign(p, PredictorType::Continuous);
  d.names = default_names(p);
  auto bernoulli_cols = [&](std::size_t from, std::size_t to, double prob) {
    for (std::size_t j = from; j < to; ++j) d.types[j] = PredictorType::Binary;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = from; j < to; ++j) d.x(i, j) = rng.bernoulli(prob) ? 1.0 : 0.0;
    }
  };
  auto uniform_cols = [&](std::size_t from, std::size_t to) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = from; j < to; ++j) d.x(i, j) = rng.uniform();
    }
  };

  switch (family_of(spec.id)) {
    case Family::Friedman: uniform_cols(0, p); break;
    case Family::Product: {
      const double rho = 0.3;
      const double innov = std::sqrt(1.0 - rho * rho);
      for (std::size_t i = 0; i < n; ++i) {
        double prev = rng.normal();
        d.x(i, 0) = prev;
        for (std::size_t j = 1; j < p; ++j) {
          prev = rho * prev + innov * rng.normal();
          d.x(i, j) = prev;
        }
      }
      break;
    }
    case Family::MixedFriedman:
      bernoulli_cols(0, half(p), 0.5);
      uniform_cols(half(p), p);
      break;
    case Family::Mixed: {
      bernoulli_cols(0, 20, 0.2);
      bernoulli_cols(20, 40, 0.5);
      const double common = std::sqrt(0.3);
      const double own = std::sqrt(0.7);
      for (std::size_t i = 0; i < n; ++i) {
        const double z0 = rng.normal();
        for (std::size_t j = 40; j < 84; ++j) d.x(i, j) = common * z0 + own * rng.normal();
      }
      break;
    }
    case Family::Example1:
    case Family::Example2:
      bernoulli_cols(0, 10, 0.5);
      uniform_cols(10, 20);
      break;
  }

  const bool binary = has_binary_response(spec.id);
  d.response = binary ? ResponseKind::Binary : ResponseKind::Continuous;
  d.y.resize(n);
  const double sd = std::sqrt(spec.sigma2);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = scenario_mean(spec.id, d.x.row(i));
    if (binary) {
      d.y[i] = rng.bernoulli(probit_probability(f)) ? 1.0 : 0.0;
    } else {
      d.y[i] = spec.sigma2 > 0.0 ? f + sd * rng.normal() : f;
    }
  }
  d.relevant = relevant_set(spec.id, p);
  return d;
}

SelectionMetrics selection_metrics(std::span<const int> selected, std::span<const int> relevant, std::size_t p) {
  std::vector<char> sel(p, 0);
  std::vector<char> rel(p, 0);
  for (int j : selected) {
    if (j < 0 || static_cast<std::size_t>(j) >= p) throw std::invalid_argument("selection_metrics: selected index out of range");
    sel[static_cast<std::size_t>(j)] = 1;
  }
  for (int j : relevant) {
    if (j < 0 || static_cast<std::size_t>(j) >= p) throw std::invalid_argument("selection_metrics: relevant index out of range");
    rel[static_cast<std::size_t>(j)] = 1;
  }
  SelectionMetrics m;
  for (std::size_t j = 0; j < p; ++j) {
    if (sel[j] && rel[j]) ++m.tp;
    if (sel[j] && !rel[j]) ++m.fp;
    if (!sel[j] && rel[j]) ++m.fn;
  }
  m.empty = m.tp + m.fp == 0;
  m.precision = m.empty ? 0.0 : static_cast<double>(m.tp) / (m.tp + m.fp);
  m.recall = m.tp + m.fn == 0 ? 1.0 : static_cast<double>(m.tp) / (m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.missed = m.fn > 0;
  return m;
}

MethodSpec parse_method(std::string_view label) {
  MethodSpec m;
  m.label = std::string(label);
  auto bad = [&] { return std::invalid_argument("unknown method '" + std::string(label) + "'"); };
  auto parse_int = [&](std::string_view s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw bad();
    }
    const int v = std::stoi(std::string(s));
    if (v < 1) throw bad();
    return v;
  };
  if (label == "permute-vip") {
    m.family = MethodSpec::Family::PermuteVip;
  } else if (label == "permute-wtvip") {
    m.family = MethodSpec::Family::PermuteWithinType;
  } else if (label == "permute-mi") {
    m.family = MethodSpec::Family::PermuteMi;
  } else if (label == "backward") {
    m.family = MethodSpec::Family::Backward;
    m.num_trees = 50;
  } else if (label.starts_with("dart-")) {
    m.family = MethodSpec::Family::Dart;
    m.num_trees = parse_int(label.substr(5));
  } else if (label.starts_with("abc-")) {
    m.family = MethodSpec::Family::Abc;
    const std::string_view rest = label.substr(4);
    const auto dash = rest.find('-');
    if (dash == std::string_view::npos) throw bad();
    m.num_trees = parse_int(rest.substr(0, dash));
    const std::string thr(rest.substr(dash + 1));
    std::size_t used = 0;
    try {
      m.threshold = std::stod(thr, &used);
    } catch (const std::exception&) {
      throw bad();
    }
    if (used != thr.size() || !(m.threshold > 0.0 && m.threshold < 1.0)) throw bad();
  } else {
    throw bad();
  }
  return m;
}

std::pair<double, double> mean_and_se(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

BenchResult run_benchmark(const BenchConfig& cfg) {
  if (cfg.reps < 1) throw std::invalid_argument("run_benchmark: reps must be >= 1");
  if (cfg.methods.empty()) throw std::invalid_argument("run_benchmark: no methods");
  const ScenarioSpec spec = resolve(cfg.scenario);
  std::vector<MethodSpec> methods;
  for (const auto& label : cfg.methods) methods.push_back(parse_method(label));

  std::vector<ImportanceKind> perm_kinds;
  for (const auto& m : methods) {
    using F = MethodSpec::Family;
    if (m.family == F::PermuteVip) perm_kinds.push_back(ImportanceKind::Vip);
    if (m.family == F::PermuteWithinType) perm_kinds.push_back(ImportanceKind::WithinTypeVip);
    if (m.family == F::PermuteMi) perm_kinds.push_back(ImportanceKind::Mi);
  }

  const std::size_t nm = methods.size();
  std::vector<ReplicationRecord> records(static_cast<std::size_t>(cfg.reps) * nm);
  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t rep) {
    Rng data_rng(derive_seed(cfg.seed, {rep}));
    const Dataset data = gen_scenario(spec, data_rng);

    std::vector<SelectionReport> perm_reports;
    std::string perm_error;
    if (!perm_kinds.empty()) {
      SamplerConfig c = cfg.sampler;
      c.num_trees = 20;
      c.seed = derive_seed(cfg.seed, {rep, 100});
      PermutationOptions po = cfg.permutation;
      po.threads = 1;
      try {
        perm_reports = permutation_select(data, perm_kinds, po, c);
      } catch (const std::exception& e) {
        perm_error = e.what();
      }
    }

    std::size_t perm_index = 0;
    for (std::size_t mi = 0; mi < nm; ++mi) {
      const MethodSpec& m = methods[mi];
      ReplicationRecord& rec = records[rep * nm + mi];
      rec.rep = static_cast<int>(rep);
      rec.method = m.label;
      using F = MethodSpec::Family;
      try {
        SelectionReport report;
        SamplerConfig c = cfg.sampler;
        c.num_trees = m.num_trees;
        c.seed = derive_seed(cfg.seed, {rep, 200 + mi});
        switch (m.family) {
          case F::PermuteVip:
          case F::PermuteWithinType:
          case F::PermuteMi:
            if (!perm_error.empty()) throw std::runtime_error(perm_error);
            report = perm_reports[perm_index++];
            break;
          case F::Backward: {
            c.num_trees = cfg.backward_trees;
            BackwardOptions bo = cfg.backward;
            bo.threads = 1;
            report = backward_select(data, bo, c);
            break;
          }
          case F::Dart:
            report = dart_select(data, c, 0.5);
            break;
          case F::Abc: {
            AbcOptions ao = cfg.abc;
            ao.threshold = m.threshold;
            ao.threads = 1;
            report = abc_forest_select(data, ao, c);
            break;
          }
        }
        rec.selected = report.selected_indices();
        rec.fits = report.num_fits;
        rec.metrics = selection_metrics(rec.selected, data.relevant, data.p());
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    }
  });

  BenchResult out;
  out.scenario = spec;
  out.reps = cfg.reps;
  out.seed = cfg.seed;
  for (std::size_t mi = 0; mi < nm; ++mi) {
    MethodSummary s;
    s.method = methods[mi].label;
    std::vector<double> miss, rec, prec, f1;
    for (int r = 0; r < cfg.reps; ++r) {
      const ReplicationRecord& rr = records[static_cast<std::size_t>(r) * nm + mi];
      if (!rr.error.empty()) {
        ++s.failures;
        continue;
      }
      ++s.reps;
      miss.push_back(rr.metrics.missed ? 1.0 : 0.0);
      rec.push_back(rr.metrics.recall);
      f1.push_back(rr.metrics.f1);
      if (rr.metrics.empty) {
        ++s.empty_selections;
      } else {
        prec.push_back(rr.metrics.precision);
      }
    }
    std::tie(s.r_miss, s.r_miss_se) = mean_and_se(miss);
    std::tie(s.recall, s.recall_se) = mean_and_se(rec);
    std::tie(s.precision, s.precision_se) = mean_and_se(prec);
    std::tie(s.f1, s.f1_se) = mean_and_se(f1);
    out.methods.push_back(s);
  }
  out.records = std::move(records);
  return out;
}

}  // namespace bartvs
