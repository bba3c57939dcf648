#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "bartvs/csv.hpp"
#include "bartvs/importance.hpp"
#include "bartvs/parallel.hpp"
#include "bartvs/sampler.hpp"
#include "bartvs/selection.hpp"
#include "bartvs/simbench.hpp"

namespace bartvs::cli {

using nlohmann::ordered_json;

namespace {

// Raised for flag combinations CLI11 cannot express; reported as usage errors.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  std::string format = "json";
  bool timings = false;
};

struct DataFlags {
  std::string path;
  std::string response = "y";
  std::vector<std::string> types;
};

struct SamplerFlags {
  std::optional<int> trees;
  int burn = 1000;
  int keep = 1000;
  int thin = 1;
};

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Dataset load(const DataFlags& f) {
  CsvOptions o;
  o.response = f.response;
  for (const auto& t : f.types) {
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--types expects name=binary|continuous, got '" + t + "'");
    try {
      o.type_overrides[t.substr(0, eq)] = parse_predictor_type(t.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return load_csv(f.path, o);
}

void emit(const Common& c, const std::string& text, std::ostream& out) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + c.out + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + c.out + "'");
}

SamplerConfig sampler_config(const SamplerFlags& f, int default_trees, std::uint64_t seed) {
  SamplerConfig s;
  s.num_trees = f.trees.value_or(default_trees);
  s.n_burn = f.burn;
  s.n_keep = f.keep;
  s.thin = f.thin;
  s.seed = seed;
  s.validate();
  return s;
}

ordered_json sampler_json(const SamplerConfig& s) {
  ordered_json j;
  j["trees"] = s.num_trees;
  j["burn"] = s.n_burn;
  j["keep"] = s.n_keep;
  j["thin"] = s.thin;
  j["gamma"] = s.gamma;
  j["beta"] = s.beta;
  j["k"] = s.k;
  j["nu"] = s.nu;
  j["q"] = s.q;
  j["cuts"] = s.num_cuts;
  j["dart"] = s.dart.enabled;
  j["seed"] = s.seed;
  return j;
}

ordered_json summary(std::vector<double> v) {
  ordered_json j;
  if (v.empty()) return j;
  std::sort(v.begin(), v.end());
  auto quant = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  j["mean"] = mean;
  j["sd"] = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  j["min"] = v.front();
  j["q025"] = quant(0.025);
  j["median"] = quant(0.5);
  j["q975"] = quant(0.975);
  j["max"] = v.back();
  return j;
}

int cmd_fit(const Common& c, const DataFlags& df, const SamplerFlags& sf, bool dart, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = load(df);
  SamplerConfig s = sampler_config(sf, 200, c.seed);
  s.dart.enabled = dart;
  const Chain chain = fit(data, s);

  std::vector<ImportanceReport> reports;
  for (ImportanceKind k : {ImportanceKind::Vip, ImportanceKind::VipApprox, ImportanceKind::WithinTypeVip,
                           ImportanceKind::Mi, ImportanceKind::Mpvip}) {
    reports.push_back(importance(chain, k));
  }

  if (c.format == "csv") {
    std::ostringstream os;
    os << "predictor,type";
    for (const auto& r : reports) os << ',' << to_string(r.kind);
    os << '\n';
    for (std::size_t j = 0; j < data.p(); ++j) {
      os << data.names[j] << ',' << to_string(data.types[j]);
      for (const auto& r : reports) os << ',' << num(r.scores[j]);
      os << '\n';
    }
    emit(c, os.str(), out);
    return 0;
  }

  ordered_json j;
  j["command"] = "fit";
  ordered_json cfg;
  cfg["data"] = df.path;
  cfg["response"] = df.response;
  cfg["sampler"] = sampler_json(s);
  j["config"] = cfg;
  ordered_json d;
  d["n"] = data.n();
  d["p"] = data.p();
  d["response_kind"] = to_string(data.response);
  j["data"] = d;

  ordered_json ch;
  ch["model"] = data.response == ResponseKind::Binary ? "probit" : "continuous";
  ch["draws"] = chain.num_draws();
  ch["births_accepted"] = chain.births_accepted;
  ch["deaths_accepted"] = chain.deaths_accepted;
  std::vector<double> sig, nodes;
  for (const auto& dr : chain.draws) {
    sig.push_back(dr.sigma);
    nodes.push_back(dr.num_internal);
  }
  ch["internal_nodes"] = summary(nodes);
  if (data.response == ResponseKind::Continuous) ch["sigma"] = summary(sig);
  j["chain"] = ch;

  if (data.response == ResponseKind::Binary) {
    const Prediction pr = predict(chain, data.x);
    double lo = 1.0, hi = 0.0;
    for (const auto& row : pr.prob_draws) {
      for (double q : row) {
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
    }
    ordered_json pj = summary(pr.mean_prob);
    pj["draw_min"] = lo;
    pj["draw_max"] = hi;
    j["training_probabilities"] = pj;
  }

  ordered_json lemma;
  try {
    const LemmaCheck lc = lemma_bound_check(chain);
    double slack = INFINITY;
    for (std::size_t k = 0; k < lc.gap.size(); ++k) slack = std::min(slack, lc.bound[k] - lc.gap[k]);
    lemma["holds"] = true;
    lemma["delta2"] = lc.delta2;
    lemma["min_slack"] = slack;
  } catch (const std::exception& e) {
    lemma["holds"] = nullptr;
    lemma["note"] = e.what();
  }
  j["vip_bound"] = lemma;

  ordered_json preds = ordered_json::array();
  for (std::size_t p = 0; p < data.p(); ++p) {
    ordered_json e;
    e["name"] = data.names[p];
    e["type"] = to_string(data.types[p]);
    for (const auto& r : reports) e[to_string(r.kind)] = r.scores[p];
    preds.push_back(e);
  }
  j["predictors"] = preds;
  if (c.timings) {
    j["timings"]["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  emit(c, j.dump(2) + "\n", out);
  return 0;
}

struct SelectFlags {
  std::string method;
  double alpha = 0.05;
  int perms = 100;
  int reps = 10;
  double split = 0.8;
  double threshold = 0.5;
  int iterations = 1000;
  double keep_frac = 0.1;
  int abc_burn = 200;
};

int cmd_select(const Common& c, const DataFlags& df, const SamplerFlags& sf, const SelectFlags& f,
               const CLI::App& sub, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  const bool permute = f.method.rfind("permute-", 0) == 0;
  const bool is_backward = f.method == "backward";
  const bool is_abc = f.method == "abc";
  const bool is_dart = f.method == "dart";
  if (!permute && !is_backward && !is_abc && !is_dart) throw UsageError("unknown method '" + f.method + "'");
  auto only = [&](const char* flag, bool ok, const char* methods) {
    if (given(flag) && !ok) throw UsageError(std::string(flag) + " applies only to " + methods);
  };
  only("--alpha", permute, "permute-* methods");
  only("--perms", permute, "permute-* methods");
  only("--reps", permute, "permute-* methods");
  only("--split", is_backward || is_abc, "backward and abc");
  only("--threshold", is_dart || is_abc, "dart and abc");
  only("--iterations", is_abc, "abc");
  only("--keep-frac", is_abc, "abc");
  only("--abc-burn", is_abc, "abc");

  const Dataset data = load(df);
  const int threads = resolve_threads(c.threads);
  SelectionReport r;
  SamplerConfig s;
  ordered_json opts;
  if (permute) {
    ImportanceKind kind = ImportanceKind::Vip;
    if (f.method == "permute-wtvip") kind = ImportanceKind::WithinTypeVip;
    else if (f.method == "permute-mi") kind = ImportanceKind::Mi;
    else if (f.method != "permute-vip") throw UsageError("unknown method '" + f.method + "'");
    s = sampler_config(sf, 20, c.seed);
    PermutationOptions po;
    po.alpha = f.alpha;
    po.num_null = f.perms;
    po.num_rep = f.reps;
    po.threads = threads;
    opts["alpha"] = f.alpha;
    opts["perms"] = f.perms;
    opts["reps"] = f.reps;
    r = permutation_select(data, kind, po, s);
  } else if (is_backward) {
    s = sampler_config(sf, 50, c.seed);
    BackwardOptions bo;
    bo.split = f.split;
    bo.threads = threads;
    opts["split"] = f.split;
    r = backward_select(data, bo, s);
  } else if (is_dart) {
    s = sampler_config(sf, 200, c.seed);
    s.dart.enabled = true;
    opts["threshold"] = f.threshold;
    r = dart_select(data, s, f.threshold);
  } else {
    s = sampler_config(sf, 10, c.seed);
    AbcOptions ao;
    ao.split = given("--split") ? f.split : 0.5;
    ao.threshold = f.threshold;
    ao.iterations = f.iterations;
    ao.keep_frac = f.keep_frac;
    ao.burn = f.abc_burn;
    ao.threads = threads;
    opts["split"] = ao.split;
    opts["threshold"] = ao.threshold;
    opts["iterations"] = ao.iterations;
    opts["keep_frac"] = ao.keep_frac;
    opts["abc_burn"] = ao.burn;
    r = abc_forest_select(data, ao, s);
  }

  if (c.format == "csv") {
    std::ostringstream os;
    os << "predictor,type,score,threshold,selected\n";
    for (std::size_t j = 0; j < r.scores.size(); ++j) {
      os << r.names[j] << ',' << to_string(r.types[j]) << ',' << num(r.scores[j]) << ',' << num(r.thresholds[j]) << ','
         << (r.selected[j] ? 1 : 0) << '\n';
    }
    emit(c, os.str(), out);
    return 0;
  }

  ordered_json j;
  j["command"] = "select";
  j["method"] = r.method;
  ordered_json cfg;
  cfg["data"] = df.path;
  cfg["response"] = df.response;
  cfg["options"] = opts;
  cfg["sampler"] = sampler_json(s);
  j["config"] = cfg;
  ordered_json preds = ordered_json::array();
  for (std::size_t p = 0; p < r.scores.size(); ++p) {
    ordered_json e;
    e["name"] = r.names[p];
    e["type"] = to_string(r.types[p]);
    e["score"] = r.scores[p];
    e["threshold"] = r.thresholds[p];
    e["selected"] = static_cast<bool>(r.selected[p]);
    if (!r.subset_inclusion.empty()) e["subset_inclusion"] = r.subset_inclusion[p];
    preds.push_back(e);
  }
  j["predictors"] = preds;
  ordered_json sel = ordered_json::array();
  for (int idx : r.selected_indices()) sel.push_back(r.names[static_cast<std::size_t>(idx)]);
  j["selected"] = sel;
  j["warnings"] = r.warnings;
  j["fits"] = r.num_fits;
  if (is_backward) {
    ordered_json trace = ordered_json::array();
    for (const auto& st : r.trace) {
      ordered_json e;
      ordered_json names = ordered_json::array();
      for (int idx : st.predictors) names.push_back(r.names[static_cast<std::size_t>(idx)]);
      e["predictors"] = names;
      e["dropped"] = st.dropped < 0 ? ordered_json(nullptr) : ordered_json(r.names[static_cast<std::size_t>(st.dropped)]);
      e["test_loss"] = st.test_loss;
      e["elpd_loo"] = st.elpd_loo;
      e["max_pareto_k"] = st.max_pareto_k;
      trace.push_back(e);
    }
    j["trace"] = trace;
    j["chosen_step"] = r.chosen_step;
    j["train_size"] = r.train_size;
    j["test_size"] = r.test_size;
  }
  if (is_abc) {
    j["abc_kept"] = r.abc_kept;
    j["abc_loss_cutoff"] = r.abc_loss_cutoff;
  }
  if (c.timings) {
    j["timings"]["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  emit(c, j.dump(2) + "\n", out);
  return 0;
}

struct BenchFlags {
  std::string scenario;
  std::size_t n = 500;
  std::size_t p = 0;
  double sigma2 = 1.0;
  int reps = 1;
  std::vector<std::string> methods;
  std::string out_dir;
  int perms = 100;
  int perm_reps = 10;
  double alpha = 0.05;
  int abc_iterations = 1000;
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

int cmd_bench(const Common& c, const BenchFlags& f, const SamplerFlags& sf, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto id = parse_scenario(f.scenario);
  if (!id) throw std::invalid_argument("unknown scenario '" + f.scenario + "'");
  BenchConfig cfg;
  cfg.scenario.id = *id;
  cfg.scenario.n = f.n;
  cfg.scenario.p = f.p;
  cfg.scenario.sigma2 = f.sigma2;
  cfg.scenario = resolve(cfg.scenario);
  cfg.reps = f.reps;
  cfg.methods = f.methods;
  for (const auto& m : cfg.methods) parse_method(m);
  cfg.seed = c.seed;
  cfg.threads = resolve_threads(c.threads);
  cfg.sampler = sampler_config(sf, 20, c.seed);
  cfg.permutation.num_null = f.perms;
  cfg.permutation.num_rep = f.perm_reps;
  cfg.permutation.alpha = f.alpha;
  cfg.abc.iterations = f.abc_iterations;
  const BenchResult res = run_benchmark(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string scen = to_string(res.scenario.id);
  ordered_json j;
  j["command"] = "bench";
  ordered_json sc;
  sc["id"] = scen;
  sc["n"] = res.scenario.n;
  sc["p"] = res.scenario.p;
  sc["sigma2"] = res.scenario.sigma2;
  j["scenario"] = sc;
  ordered_json conf;
  conf["reps"] = res.reps;
  conf["seed"] = res.seed;
  conf["methods"] = f.methods;
  conf["perms"] = f.perms;
  conf["perm_reps"] = f.perm_reps;
  conf["alpha"] = f.alpha;
  conf["abc_iterations"] = f.abc_iterations;
  conf["sampler"] = sampler_json(cfg.sampler);
  j["config"] = conf;
  ordered_json table = ordered_json::array();
  for (const auto& m : res.methods) {
    ordered_json e;
    e["method"] = m.method;
    e["reps"] = m.reps;
    e["failures"] = m.failures;
    e["empty_selections"] = m.empty_selections;
    e["r_miss"] = m.r_miss;
    e["r_miss_se"] = m.r_miss_se;
    e["recall"] = m.recall;
    e["recall_se"] = m.recall_se;
    e["precision"] = m.precision;
    e["precision_se"] = m.precision_se;
    e["f1"] = m.f1;
    e["f1_se"] = m.f1_se;
    table.push_back(e);
  }
  j["table"] = table;
  ordered_json recs = ordered_json::array();
  std::uint64_t total_fits = 0;
  for (const auto& r : res.records) {
    ordered_json e;
    e["rep"] = r.rep;
    e["method"] = r.method;
    if (!r.error.empty()) {
      e["error"] = r.error;
    } else {
      e["selected"] = r.selected;
      e["tp"] = r.metrics.tp;
      e["fp"] = r.metrics.fp;
      e["fn"] = r.metrics.fn;
      e["precision"] = r.metrics.precision;
      e["recall"] = r.metrics.recall;
      e["f1"] = r.metrics.f1;
      e["missed"] = r.metrics.missed;
      e["empty"] = r.metrics.empty;
    }
    e["fits"] = r.fits;
    total_fits += r.fits;
    recs.push_back(e);
  }
  j["replications"] = recs;
  j["total_fits"] = total_fits;
  if (c.timings) j["timings"]["wall_seconds"] = seconds;
  const std::string json_text = j.dump(2) + "\n";

  if (f.out_dir.empty()) {
    emit(c, json_text, out);
    return 0;
  }
  const std::filesystem::path dir(f.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "bench.json", json_text);

  std::ostringstream tab;
  tab << "scenario,method,reps,failures,empty_selections,r_miss,r_miss_se,recall,recall_se,precision,precision_se,f1,f1_se\n";
  for (const auto& m : res.methods) {
    tab << scen << ',' << m.method << ',' << m.reps << ',' << m.failures << ',' << m.empty_selections << ','
        << num(m.r_miss) << ',' << num(m.r_miss_se) << ',' << num(m.recall) << ',' << num(m.recall_se) << ','
        << num(m.precision) << ',' << num(m.precision_se) << ',' << num(m.f1) << ',' << num(m.f1_se) << '\n';
  }
  write_file(dir / "bench_table.csv", tab.str());

  std::ostringstream lng;
  lng << "scenario,method,rep,metric,value\n";
  for (const auto& r : res.records) {
    auto row = [&](const char* metric, double v) {
      lng << scen << ',' << r.method << ',' << r.rep << ',' << metric << ',' << num(v) << '\n';
    };
    if (!r.error.empty()) {
      row("failed", 1.0);
      continue;
    }
    row("precision", r.metrics.precision);
    row("recall", r.metrics.recall);
    row("f1", r.metrics.f1);
    row("missed", r.metrics.missed ? 1.0 : 0.0);
    row("empty", r.metrics.empty ? 1.0 : 0.0);
    row("tp", r.metrics.tp);
    row("fp", r.metrics.fp);
    row("fn", r.metrics.fn);
  }
  write_file(dir / "bench_long.csv", lng.str());
  return 0;
}

int cmd_gen(const Common& c, const BenchFlags& f, std::ostream& out) {
  const auto id = parse_scenario(f.scenario);
  if (!id) throw std::invalid_argument("unknown scenario '" + f.scenario + "'");
  ScenarioSpec spec;
  spec.id = *id;
  spec.n = f.n;
  spec.p = f.p;
  spec.sigma2 = f.sigma2;
  Rng rng(derive_seed(c.seed, {0}));
  const Dataset d = gen_scenario(spec, rng);
  std::ostringstream os;
  for (const auto& name : d.names) os << name << ',';
  os << "y\n";
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t j = 0; j < d.p(); ++j) os << num(d.x(i, j)) << ',';
    os << num(d.y[i]) << '\n';
  }
  emit(c, os.str(), out);
  return 0;
}

void print_error(std::ostream& err, const std::string& command, const std::string& kind, const std::string& message) {
  ordered_json e;
  e["error"]["command"] = command;
  e["error"]["kind"] = kind;
  e["error"]["message"] = message;
  err << e.dump() << '\n';
}

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sub.add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
  sub.add_option("--out", c.out, "Output file (default stdout)");
  sub.add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  sub.add_flag("--timings", c.timings, "Include wall-clock timings (makes output run-dependent)");
}

void add_sampler(CLI::App& sub, SamplerFlags& s) {
  sub.add_option("--trees", s.trees, "Number of trees (method default if omitted)");
  sub.add_option("--burn", s.burn, "Burn-in iterations")->capture_default_str();
  sub.add_option("--keep", s.keep, "Kept draws")->capture_default_str();
  sub.add_option("--thin", s.thin, "Thinning interval")->capture_default_str();
}

void add_data(CLI::App& sub, DataFlags& d) {
  sub.add_option("data", d.path, "CSV file with a header row")->required();
  sub.add_option("--response", d.response, "Response column")->capture_default_str();
  sub.add_option("--types", d.types, "Type overrides, name=binary|continuous")->delimiter(',');
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"BART fitting, importance measures, and variable selection"};
  app.require_subcommand(1);

  Common common;
  DataFlags data;
  SamplerFlags sampler;
  bool dart = false;
  SelectFlags sel;
  BenchFlags bench;

  auto* fit_cmd = app.add_subcommand("fit", "Fit BART and report every importance measure");
  add_data(*fit_cmd, data);
  add_sampler(*fit_cmd, sampler);
  add_common(*fit_cmd, common);
  fit_cmd->add_flag("--dart", dart, "Dirichlet split-variable prior");

  auto* sel_cmd = app.add_subcommand("select", "Run one variable-selection method");
  add_data(*sel_cmd, data);
  add_sampler(*sel_cmd, sampler);
  add_common(*sel_cmd, common);
  sel_cmd->add_option("--method", sel.method, "permute-vip|permute-wtvip|permute-mi|backward|dart|abc")
      ->required()
      ->check(CLI::IsMember({"permute-vip", "permute-wtvip", "permute-mi", "backward", "dart", "abc"}));
  sel_cmd->add_option("--alpha", sel.alpha, "Permutation significance level")->capture_default_str();
  sel_cmd->add_option("--perms", sel.perms, "Null permutations")->capture_default_str();
  sel_cmd->add_option("--reps", sel.reps, "Repeat fits on the real data")->capture_default_str();
  sel_cmd->add_option("--split", sel.split, "Training fraction (backward 0.8, abc 0.5)");
  sel_cmd->add_option("--threshold", sel.threshold, "Inclusion threshold")->capture_default_str();
  sel_cmd->add_option("--iterations", sel.iterations, "ABC iterations")->capture_default_str();
  sel_cmd->add_option("--keep-frac", sel.keep_frac, "ABC kept fraction")->capture_default_str();
  sel_cmd->add_option("--abc-burn", sel.abc_burn, "Burn-in per ABC fit")->capture_default_str();

  auto* bench_cmd = app.add_subcommand("bench", "Replicated benchmark on a simulated scenario");
  add_sampler(*bench_cmd, sampler);
  add_common(*bench_cmd, common);
  bench_cmd->add_option("--scenario", bench.scenario, "CC1 CC2 CM1 CM2 BC1 BC2 BM1 BM2 EX1 EX2")->required();
  bench_cmd->add_option("--n", bench.n, "Observations")->capture_default_str();
  bench_cmd->add_option("--p", bench.p, "Predictors (0 = scenario default)")->capture_default_str();
  bench_cmd->add_option("--sigma2", bench.sigma2, "Noise variance")->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps, "Replications")->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "permute-vip,permute-wtvip,permute-mi,backward,dart-M,abc-M-T")
      ->delimiter(',')
      ->required();
  bench_cmd->add_option("--out-dir", bench.out_dir, "Write bench.json, bench_table.csv, bench_long.csv here");
  bench_cmd->add_option("--perms", bench.perms, "Null permutations")->capture_default_str();
  bench_cmd->add_option("--perm-reps", bench.perm_reps, "Repeat fits on the real data")->capture_default_str();
  bench_cmd->add_option("--alpha", bench.alpha, "Permutation significance level")->capture_default_str();
  bench_cmd->add_option("--abc-iterations", bench.abc_iterations, "ABC iterations")->capture_default_str();

  Common gen_common;
  BenchFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write one simulated scenario dataset as CSV");
  gen_cmd->add_option("--scenario", gen.scenario, "CC1 CC2 CM1 CM2 BC1 BC2 BM1 BM2 EX1 EX2")->required();
  gen_cmd->add_option("--n", gen.n, "Observations")->capture_default_str();
  gen_cmd->add_option("--p", gen.p, "Predictors (0 = scenario default)")->capture_default_str();
  gen_cmd->add_option("--sigma2", gen.sigma2, "Noise variance")->capture_default_str();
  gen_cmd->add_option("--seed", gen_common.seed, "Seed")->capture_default_str();
  gen_cmd->add_option("--out", gen_common.out, "Output file (default stdout)");

  std::string command = "bartvs";
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    for (auto* s : app.get_subcommands()) command = s->get_name();
    print_error(err, command, "usage", e.what());
    return 2;
  }

  try {
    if (fit_cmd->parsed()) {
      command = "fit";
      return cmd_fit(common, data, sampler, dart, out);
    }
    if (sel_cmd->parsed()) {
      command = "select";
      return cmd_select(common, data, sampler, sel, *sel_cmd, out);
    }
    if (gen_cmd->parsed()) {
      command = "gen";
      return cmd_gen(gen_common, gen, out);
    }
    command = "bench";
    if (!common.out.empty() && !bench.out_dir.empty()) throw UsageError("--out and --out-dir are exclusive");
    if (common.format != "json") throw UsageError("bench writes json to --out or json+csv to --out-dir");
    return cmd_bench(common, bench, sampler, out);
  } catch (const UsageError& e) {
    print_error(err, command, "usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(err, command, "runtime", e.what());
    return 1;
  }
}

}  // namespace bartvs::cli
