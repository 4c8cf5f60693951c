#include "jsr/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace jsr {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

enum StreamTag : std::uint64_t {
  kTagPilot = 101,
  kTagTestSupport = 102,
  kTagTestSignal = 103,
  kTagTestNoise = 104,
  kTagValSupport = 105,
  kTagValSignal = 106,
  kTagValNoise = 107,
  kTagCalibSupport = 108,
  kTagCalibSignal = 109,
  kTagCalibNoise = 110,
  kTagInit = 111,
};

double median_of(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of empty grid");
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

}  // namespace

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "bcd") return Algorithm::kBcd;
  if (name == "pcd") return Algorithm::kPcd;
  if (name == "amp") return Algorithm::kAmp;
  if (name == "learned") return Algorithm::kLearned;
  if (name == "group_lasso_dl") return Algorithm::kGroupLassoDl;
  if (name == "amp_dl") return Algorithm::kAmpDl;
  throw ConfigError("algorithms: unknown algorithm \"" + name + "\"");
}

std::string algorithm_name(Algorithm alg) {
  switch (alg) {
    case Algorithm::kBcd: return "bcd";
    case Algorithm::kPcd: return "pcd";
    case Algorithm::kAmp: return "amp";
    case Algorithm::kLearned: return "learned";
    case Algorithm::kGroupLassoDl: return "group_lasso_dl";
    case Algorithm::kAmpDl: return "amp_dl";
  }
  return "bcd";
}

bool algorithm_needs_params(Algorithm alg) {
  return alg == Algorithm::kLearned || alg == Algorithm::kGroupLassoDl ||
         alg == Algorithm::kAmpDl;
}

SparsityConfig ScenarioConfig::sparsity() const {
  SparsityConfig s;
  s.mode = mode;
  s.n = n;
  s.p = p;
  s.groups = groups;
  return s;
}

double ScenarioConfig::p_or_g() const {
  return mode == SparsityMode::kIid ? p : static_cast<double>(groups);
}

std::string ScenarioConfig::id() const {
  std::ostringstream os;
  os << (mode == SparsityMode::kIid ? "iid" : "grp") << "_N" << n << "_L" << l << "_M"
     << m;
  if (mode == SparsityMode::kIid) {
    os << "_p" << p;
  } else {
    os << "_G" << groups;
  }
  os << "_s" << sigma2;
  return os.str();
}

void ScenarioConfig::validate() const {
  if (n < 1 || l < 1 || m < 1) throw ConfigError("scenario: N, L, M must be >= 1");
  sparsity().validate();
  NoiseModel{sigma2}.validate();
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (algorithms.empty()) throw ConfigError("algorithms: at least one required");
  if (test_samples < 1) throw ConfigError("T: must be >= 1");
  if (k_max < 1) throw ConfigError("solver.k_max: must be >= 1");
  if (stop_tol < 0.0) throw ConfigError("solver.stop_tol: must be >= 0");
  schedule.validate();
  if (lambda_grid.empty()) throw ConfigError("lambda_grid: must be non-empty");
  for (double c : lambda_grid) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("lambda_grid: bad value");
  }
  if (net_u < 0 || net_v < 0) throw ConfigError("net: U and V must be >= 0");
  if (validation_samples < 1) throw ConfigError("validation_samples: must be >= 1");
  if (sweep) {
    if (sweep->kind != "ratio" && sweep->kind != "p") {
      throw ConfigError("sweep.kind: expected \"ratio\" or \"p\"");
    }
    if (sweep->values.empty()) throw ConfigError("sweep.values: must be non-empty");
  }
}

namespace {

// Typed field access with the field path in every diagnostic.
template <typename T>
T field(const json& j, const std::string& key, const std::string& ctx, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for " + ctx + key);
  }
}

template <typename T>
T required_field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ConfigError("config: missing field " + ctx + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for " + ctx + key);
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  const json scenario = required_field<json>(j, "scenario", "");
  cfg.scenario.n = required_field<int>(scenario, "N", "scenario.");
  cfg.scenario.l = required_field<int>(scenario, "L", "scenario.");
  cfg.scenario.m = required_field<int>(scenario, "M", "scenario.");
  const std::string mode = field<std::string>(scenario, "mode", "scenario.", "iid");
  if (mode == "iid") {
    cfg.scenario.mode = SparsityMode::kIid;
  } else if (mode == "grouped") {
    cfg.scenario.mode = SparsityMode::kGrouped;
  } else {
    throw ConfigError("config: bad value for scenario.mode (expected iid or grouped)");
  }
  cfg.scenario.p = field<double>(scenario, "p", "scenario.", 0.1);
  cfg.scenario.groups = field<int>(scenario, "G", "scenario.", 1);
  cfg.scenario.sigma2 = field<double>(scenario, "sigma2", "scenario.", 0.1);
  cfg.scenario.normalize_pilots =
      field<bool>(scenario, "normalize_pilots", "scenario.", false);

  if (j.contains("algorithms")) {
    cfg.algorithms.clear();
    for (const auto& name : required_field<std::vector<std::string>>(j, "algorithms", "")) {
      cfg.algorithms.push_back(algorithm_from_name(name));
    }
  }
  cfg.lambda_grid = field<std::vector<double>>(j, "lambda_grid", "", cfg.lambda_grid);
  cfg.test_samples = field<int>(j, "T", "", cfg.test_samples);

  if (j.contains("seeds")) {
    const json seeds = j.at("seeds");
    cfg.seeds.data = field<std::uint64_t>(seeds, "data", "seeds.", cfg.seeds.data);
    cfg.seeds.noise = field<std::uint64_t>(seeds, "noise", "seeds.", cfg.seeds.noise);
    cfg.seeds.init = field<std::uint64_t>(seeds, "init", "seeds.", cfg.seeds.init);
  }

  if (j.contains("solver")) {
    const json solver = j.at("solver");
    cfg.k_max = field<int>(solver, "k_max", "solver.", cfg.k_max);
    cfg.stop_tol = field<double>(solver, "stop_tol", "solver.", cfg.stop_tol);
    if (solver.contains("schedule")) {
      const json sched = solver.at("schedule");
      cfg.schedule.form = step_form_from_name(
          field<std::string>(sched, "form", "solver.schedule.", "inv_pow"));
      cfg.schedule.gamma0 =
          field<double>(sched, "gamma0", "solver.schedule.", cfg.schedule.gamma0);
      cfg.schedule.delta =
          field<double>(sched, "delta", "solver.schedule.", cfg.schedule.delta);
    }
  }

  if (j.contains("net")) {
    const json net = j.at("net");
    cfg.net_u = field<int>(net, "U", "net.", cfg.net_u);
    cfg.net_v = field<int>(net, "V", "net.", cfg.net_v);
    cfg.net_hidden = field<int>(net, "hidden", "net.", cfg.net_hidden);
  }

  if (j.contains("train")) {
    const json train = j.at("train");
    cfg.train.sample_count = field<int>(train, "I", "train.", cfg.train.sample_count);
    cfg.train.batch_size = field<int>(train, "batch", "train.", cfg.train.batch_size);
    cfg.train.epochs = field<int>(train, "epochs", "train.", 0);
    cfg.train.learning_rate = field<double>(train, "lr", "train.", cfg.train.learning_rate);
    cfg.train.beta1 = field<double>(train, "beta1", "train.", cfg.train.beta1);
    cfg.train.beta2 = field<double>(train, "beta2", "train.", cfg.train.beta2);
    cfg.train.epsilon = field<double>(train, "epsilon", "train.", cfg.train.epsilon);
    cfg.train.project_columns =
        field<bool>(train, "project_columns", "train.", cfg.train.project_columns);
    cfg.train.threads = field<int>(train, "threads", "train.", cfg.train.threads);
    cfg.train.eval_samples =
        field<int>(train, "eval_samples", "train.", cfg.train.eval_samples);
    cfg.train_lambda_scale =
        field<double>(train, "lambda_scale", "train.", cfg.train_lambda_scale);
  } else {
    cfg.train.epochs = 0;
  }

  cfg.output = field<std::string>(j, "output", "", "");
  cfg.params_path = field<std::string>(j, "params_path", "", "");
  cfg.validation_samples =
      field<int>(j, "validation_samples", "", cfg.validation_samples);
  cfg.timing_reps = field<int>(j, "timing_reps", "", cfg.timing_reps);

  if (j.contains("sweep")) {
    SweepSpec spec;
    const json sweep = j.at("sweep");
    spec.kind = required_field<std::string>(sweep, "kind", "sweep.");
    spec.values = required_field<std::vector<double>>(sweep, "values", "sweep.");
    cfg.sweep = std::move(spec);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    os << r.scenario_id << ',' << r.alg << ',' << r.n << ',' << r.l << ',' << r.m << ','
       << format_double(r.p_or_g) << ',' << format_double(r.lambda) << ',' << r.k_max
       << ',' << r.u << ',' << r.v << ',' << format_double(r.mse) << ','
       << format_double(r.wall_time_s) << ',' << r.seed << '\n';
  }
  return os.str();
}

ExperimentReport report_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kReportHeader) {
    throw ConfigError("report csv: bad header");
  }
  ExperimentReport report;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 13) throw ConfigError("report csv: wrong column count");
    ReportRow r;
    r.scenario_id = cells[0];
    r.alg = cells[1];
    r.n = std::stoi(cells[2]);
    r.l = std::stoi(cells[3]);
    r.m = std::stoi(cells[4]);
    r.p_or_g = std::stod(cells[5]);
    r.lambda = std::stod(cells[6]);
    r.k_max = std::stoi(cells[7]);
    r.u = std::stoi(cells[8]);
    r.v = std::stoi(cells[9]);
    r.mse = std::stod(cells[10]);
    r.wall_time_s = std::stod(cells[11]);
    r.seed = std::stoull(cells[12]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

double eval_mse(const std::vector<ComplexMatrix>& x_true,
                const std::vector<ComplexMatrix>& x_hat, int n, int t) {
  if (x_true.size() != x_hat.size() || static_cast<int>(x_true.size()) != t) {
    throw ShapeError("eval_mse: sample counts differ from T");
  }
  double sum = 0.0;
  for (int i = 0; i < t; ++i) {
    if (x_true[i].rows() != n || x_hat[i].rows() != n) {
      throw ShapeError("eval_mse: sample row count differs from N");
    }
    sum += (x_true[i] - x_hat[i]).squared_frobenius();
  }
  return sum / (static_cast<double>(n) * t);
}

double calibrate_net_lambda(const ScenarioConfig& scenario, const ComplexMatrix& a,
                            double scale, const RngStream& base, int draws) {
  const SparsityConfig sparsity = scenario.sparsity();
  const NoiseModel noise{scenario.sigma2};
  std::vector<double> thresholds;
  thresholds.reserve(draws);
  for (int i = 0; i < draws; ++i) {
    RngStream sup = base.derive(kTagCalibSupport, i);
    RngStream sig = base.derive(kTagCalibSignal, i);
    RngStream nz = base.derive(kTagCalibNoise, i);
    const Support support = gen_support(sparsity, sup);
    const ComplexMatrix x = gen_signals(support, scenario.n, scenario.m, sig);
    const ComplexMatrix y = measure(a, x, noise, nz);
    thresholds.push_back(kkt_zero_threshold(a, y));
  }
  return scale * median_of(std::move(thresholds));
}

TrainResult train_for_scenario(const ExperimentConfig& cfg,
                               const ScenarioConfig& scenario) {
  NetArch arch;
  arch.n = scenario.n;
  arch.l = scenario.l;
  arch.m = scenario.m;
  arch.unrolled_layers = cfg.net_u;
  arch.correction_layers = cfg.net_v;
  arch.hidden = cfg.net_hidden;
  arch.schedule = cfg.schedule;
  arch.lambda = 0.0;

  RngStream init_rng = RngStream(cfg.seeds.init, 0).derive(kTagInit);
  NetworkParams params = init_params(arch, init_rng);
  params.arch.lambda = calibrate_net_lambda(
      scenario, params.a, cfg.train_lambda_scale, RngStream(cfg.seeds.data, 0));

  TrainingConfig tc = cfg.train;
  tc.seed = cfg.seeds.data ^ (cfg.seeds.noise << 1);
  return train(params, scenario.sparsity(), NoiseModel{scenario.sigma2}, tc);
}

namespace {

struct TestSet {
  std::vector<ComplexMatrix> x;
  // Noise streams are re-derived per sample so every algorithm sees the same
  // realization regardless of evaluation order.
};

std::vector<ComplexMatrix> gen_signal_set(const ScenarioConfig& scenario, int count,
                                          const RngStream& base, StreamTag sup_tag,
                                          StreamTag sig_tag) {
  const SparsityConfig sparsity = scenario.sparsity();
  std::vector<ComplexMatrix> out;
  out.reserve(count);
  for (int t = 0; t < count; ++t) {
    RngStream sup = base.derive(sup_tag, t);
    RngStream sig = base.derive(sig_tag, t);
    out.push_back(gen_signals(gen_support(sparsity, sup), scenario.n, scenario.m, sig));
  }
  return out;
}

ComplexMatrix measure_sample(const ComplexMatrix& a, const ComplexMatrix& x,
                             const ScenarioConfig& scenario, const RngStream& noise_base,
                             StreamTag tag, int index) {
  RngStream nz = noise_base.derive(tag, index);
  return measure(a, x, NoiseModel{scenario.sigma2}, nz);
}

struct Recovery {
  ComplexMatrix x_hat;
  double seconds = 0.0;
};

Recovery recover(Algorithm alg, const ComplexMatrix& a, const ComplexMatrix& y,
                 double lambda_mult, const ExperimentConfig& cfg,
                 const ScenarioConfig& scenario, const NetworkParams* net) {
  Recovery out;
  const auto t0 = Clock::now();
  switch (alg) {
    case Algorithm::kBcd:
    case Algorithm::kGroupLassoDl: {
      GroupLassoProblem p{a, y, lambda_mult * kkt_zero_threshold(a, y)};
      SolverOptions opts;
      opts.k_max = cfg.k_max;
      opts.stop_tol = cfg.stop_tol;
      out.x_hat = bcd_mmv(p, opts).x_hat;
      break;
    }
    case Algorithm::kPcd: {
      GroupLassoProblem p{a, y, lambda_mult * kkt_zero_threshold(a, y)};
      SolverOptions opts;
      opts.k_max = cfg.k_max;
      opts.stop_tol = cfg.stop_tol;
      opts.schedule = cfg.schedule;
      out.x_hat = pcd_mmv(p, opts).x_hat;
      break;
    }
    case Algorithm::kAmp:
    case Algorithm::kAmpDl: {
      AmpOptions opts;
      opts.access_prob = scenario.mode == SparsityMode::kIid
                             ? scenario.p
                             : 1.0 / scenario.groups;
      opts.k_max = cfg.k_max;
      out.x_hat = amp_mmv_baseline(a, y, opts).x_hat;
      break;
    }
    case Algorithm::kLearned: {
      out.x_hat = correction_forward(*net, approximation_forward(*net, y));
      break;
    }
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

// Grid search over lambda multipliers on the validation split.
double tune_lambda_multiplier(Algorithm alg, const ComplexMatrix& a,
                              const std::vector<ComplexMatrix>& x_val,
                              const std::vector<ComplexMatrix>& y_val,
                              const ExperimentConfig& cfg,
                              const ScenarioConfig& scenario) {
  double best_mult = cfg.lambda_grid.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (double mult : cfg.lambda_grid) {
    std::vector<ComplexMatrix> estimates;
    estimates.reserve(x_val.size());
    for (std::size_t t = 0; t < x_val.size(); ++t) {
      estimates.push_back(recover(alg, a, y_val[t], mult, cfg, scenario, nullptr).x_hat);
    }
    const double mse = eval_mse(x_val, estimates, scenario.n,
                                static_cast<int>(x_val.size()));
    if (mse < best_mse) {
      best_mse = mse;
      best_mult = mult;
    }
  }
  return best_mult;
}

ReportRow base_row(const ExperimentConfig& cfg, const ScenarioConfig& scenario,
                   Algorithm alg) {
  ReportRow row;
  row.scenario_id = scenario.id();
  row.alg = algorithm_name(alg);
  row.n = scenario.n;
  row.l = scenario.l;
  row.m = scenario.m;
  row.p_or_g = scenario.p_or_g();
  row.k_max = alg == Algorithm::kLearned ? 0 : cfg.k_max;
  row.seed = cfg.seeds.data;
  return row;
}

// Scenario at one sweep grid point.
ScenarioConfig point_scenario(const ScenarioConfig& base, const std::string& kind,
                              double value) {
  ScenarioConfig sc = base;
  if (kind == "ratio") {
    sc.l = std::max(1, static_cast<int>(std::lround(value * base.n)));
  } else if (kind == "p") {
    if (base.mode == SparsityMode::kIid) {
      sc.p = value;
    } else {
      const int g = std::max(1, static_cast<int>(std::lround(1.0 / value)));
      if (base.n % g != 0) {
        throw ConfigError("sweep: p=" + std::to_string(value) +
                          " maps to group count " + std::to_string(g) +
                          " which does not divide N");
      }
      sc.groups = g;
    }
  } else {
    throw ConfigError("sweep: unknown kind \"" + kind + "\"");
  }
  sc.validate();
  return sc;
}

NetworkParams resolve_params(const ExperimentConfig& cfg, const ScenarioConfig& scenario) {
  if (!cfg.params_path.empty()) {
    NetworkParams params = load_params(cfg.params_path);
    if (params.arch.n == scenario.n && params.arch.l == scenario.l &&
        params.arch.m == scenario.m) {
      return params;
    }
    if (cfg.train.epochs == 0) {
      throw ConfigError("params_path: checkpoint dimensions do not match scenario " +
                        scenario.id() + " and training is disabled");
    }
  } else if (cfg.train.epochs == 0) {
    throw ConfigError(
        "learned algorithms need params_path or train.epochs > 0 in the config");
  }
  return train_for_scenario(cfg, scenario).params;
}

}  // namespace

GeneratedSet gen_scenario_set(const ExperimentConfig& cfg, int count) {
  cfg.validate();
  const ScenarioConfig& sc = cfg.scenario;
  const RngStream data_base(cfg.seeds.data, 0);
  const RngStream noise_base(cfg.seeds.noise, 0);

  GeneratedSet set;
  RngStream pilot_rng = data_base.derive(kTagPilot);
  set.a = gen_measurement_matrix(sc.l, sc.n, pilot_rng, sc.normalize_pilots);
  set.x = gen_signal_set(sc, count, data_base, kTagTestSupport, kTagTestSignal);
  set.y.reserve(count);
  for (int t = 0; t < count; ++t) {
    set.y.push_back(measure_sample(set.a, set.x[t], sc, noise_base, kTagTestNoise, t));
  }
  return set;
}

ConvergenceStudy run_convergence_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const ScenarioConfig& sc = cfg.scenario;
  const RngStream data_base(cfg.seeds.data, 0);
  const RngStream noise_base(cfg.seeds.noise, 0);

  RngStream pilot_rng = data_base.derive(kTagPilot);
  const ComplexMatrix a =
      gen_measurement_matrix(sc.l, sc.n, pilot_rng, sc.normalize_pilots);
  const auto x_set = gen_signal_set(sc, cfg.test_samples, data_base, kTagTestSupport,
                                    kTagTestSignal);
  const double mult = median_of(cfg.lambda_grid);

  std::vector<double> bcd_mse(cfg.k_max, 0.0), pcd_mse(cfg.k_max, 0.0);
  double bcd_iter_seconds = 0.0, pcd_iter_seconds = 0.0;
  double bcd_final = 0.0, pcd_final = 0.0;

  for (int t = 0; t < cfg.test_samples; ++t) {
    const ComplexMatrix y = measure_sample(a, x_set[t], sc, noise_base, kTagTestNoise, t);
    GroupLassoProblem p{a, y, mult * kkt_zero_threshold(a, y)};
    SolverOptions opts;
    opts.k_max = cfg.k_max;
    opts.stop_tol = 0.0;  // run every iteration so the curves are full length
    opts.truth = &x_set[t];

    const SolverResult bcd = bcd_mmv(p, opts);
    opts.schedule = cfg.schedule;
    const SolverResult pcd = pcd_mmv(p, opts);
    for (int k = 0; k < cfg.k_max; ++k) {
      bcd_mse[k] += bcd.mse_history[k];
      pcd_mse[k] += pcd.mse_history[k];
    }
    bcd_iter_seconds += bcd.wall_time_s / bcd.iterations_run;
    pcd_iter_seconds += pcd.wall_time_s / pcd.iterations_run;
    bcd_final += bcd.mse_history.back();
    pcd_final += pcd.mse_history.back();
  }

  const double inv_t = 1.0 / cfg.test_samples;
  ConvergenceStudy study;
  std::ostringstream curves;
  curves << "k,alg,mse\n";
  curves.precision(17);
  for (int k = 0; k < cfg.k_max; ++k) {
    curves << (k + 1) << ",bcd," << bcd_mse[k] * inv_t << '\n';
  }
  for (int k = 0; k < cfg.k_max; ++k) {
    curves << (k + 1) << ",pcd," << pcd_mse[k] * inv_t << '\n';
  }
  study.curves_csv = curves.str();

  ReportRow bcd_row = base_row(cfg, sc, Algorithm::kBcd);
  bcd_row.lambda = mult;
  bcd_row.mse = bcd_final * inv_t;
  bcd_row.wall_time_s = bcd_iter_seconds * inv_t;
  ReportRow pcd_row = base_row(cfg, sc, Algorithm::kPcd);
  pcd_row.lambda = mult;
  pcd_row.mse = pcd_final * inv_t;
  pcd_row.wall_time_s = pcd_iter_seconds * inv_t;
  study.report.rows = {bcd_row, pcd_row};
  return study;
}

ExperimentReport run_mse_sweep(const ExperimentConfig& cfg, const std::string& kind_arg) {
  cfg.validate();
  std::string kind = kind_arg;
  std::vector<double> values;
  if (cfg.sweep) {
    if (kind.empty()) kind = cfg.sweep->kind;
    if (kind == cfg.sweep->kind) values = cfg.sweep->values;
  }
  if (kind.empty()) kind = "ratio";
  if (values.empty()) {
    values = (kind == "ratio") ? std::vector<double>{0.15, 0.2, 0.25, 0.3}
                               : std::vector<double>{0.05, 0.1, 0.15, 0.2};
  }

  ExperimentReport report;
  auto flush_partial = [&report, &cfg] {
    if (!cfg.output.empty()) {
      std::ofstream os(cfg.output);
      if (os) os << report_to_csv(report);
    }
  };

  for (std::size_t point = 0; point < values.size(); ++point) {
    try {
      const ScenarioConfig sc = point_scenario(cfg.scenario, kind, values[point]);
      const RngStream data_base(cfg.seeds.data, point + 1);
      const RngStream noise_base(cfg.seeds.noise, point + 1);

      RngStream pilot_rng = data_base.derive(kTagPilot);
      const ComplexMatrix a_iid =
          gen_measurement_matrix(sc.l, sc.n, pilot_rng, sc.normalize_pilots);

      NetworkParams net;
      bool have_net = false;
      for (Algorithm alg : cfg.algorithms) {
        if (algorithm_needs_params(alg)) {
          net = resolve_params(cfg, sc);
          have_net = true;
          break;
        }
      }

      const auto x_test = gen_signal_set(sc, cfg.test_samples, data_base,
                                         kTagTestSupport, kTagTestSignal);
      const auto x_val = gen_signal_set(sc, cfg.validation_samples, data_base,
                                        kTagValSupport, kTagValSignal);

      for (Algorithm alg : cfg.algorithms) {
        const ComplexMatrix& a =
            algorithm_needs_params(alg) && alg != Algorithm::kLearned ? net.a : a_iid;

        double mult = 0.0;
        if (alg == Algorithm::kBcd || alg == Algorithm::kPcd ||
            alg == Algorithm::kGroupLassoDl) {
          std::vector<ComplexMatrix> y_val;
          y_val.reserve(x_val.size());
          for (std::size_t t = 0; t < x_val.size(); ++t) {
            y_val.push_back(measure_sample(a, x_val[t], sc, noise_base, kTagValNoise,
                                           static_cast<int>(t)));
          }
          mult = tune_lambda_multiplier(alg, a, x_val, y_val, cfg, sc);
        }

        std::vector<ComplexMatrix> estimates;
        estimates.reserve(x_test.size());
        double seconds = 0.0;
        for (int t = 0; t < cfg.test_samples; ++t) {
          const ComplexMatrix& a_used = alg == Algorithm::kLearned ? net.a : a;
          const ComplexMatrix y =
              measure_sample(a_used, x_test[t], sc, noise_base, kTagTestNoise, t);
          Recovery rec = recover(alg, a, y, mult, cfg, sc, have_net ? &net : nullptr);
          seconds += rec.seconds;
          estimates.push_back(std::move(rec.x_hat));
        }

        ReportRow row = base_row(cfg, sc, alg);
        row.lambda = alg == Algorithm::kLearned ? net.arch.lambda : mult;
        if (alg == Algorithm::kLearned) {
          row.u = net.arch.unrolled_layers;
          row.v = net.arch.correction_layers;
        }
        row.mse = eval_mse(x_test, estimates, sc.n, cfg.test_samples);
        row.wall_time_s = seconds / cfg.test_samples;
        report.rows.push_back(std::move(row));
      }
    } catch (...) {
      flush_partial();
      throw;
    }
  }
  flush_partial();
  return report;
}

ExperimentReport run_timing_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<double> values = {static_cast<double>(cfg.scenario.l) / cfg.scenario.n};
  std::string kind = "ratio";
  if (cfg.sweep && cfg.sweep->kind == "ratio") values = cfg.sweep->values;

  ExperimentReport report;
  for (std::size_t point = 0; point < values.size(); ++point) {
    const ScenarioConfig sc = point_scenario(cfg.scenario, kind, values[point]);
    const RngStream data_base(cfg.seeds.data, point + 1);
    const RngStream noise_base(cfg.seeds.noise, point + 1);

    RngStream pilot_rng = data_base.derive(kTagPilot);
    const ComplexMatrix a_iid =
        gen_measurement_matrix(sc.l, sc.n, pilot_rng, sc.normalize_pilots);
    NetworkParams net;
    bool have_net = false;
    for (Algorithm alg : cfg.algorithms) {
      if (algorithm_needs_params(alg)) {
        net = resolve_params(cfg, sc);
        have_net = true;
        break;
      }
    }

    // Samples and measurements are generated up front; only recovery is timed.
    const auto x_test = gen_signal_set(sc, cfg.test_samples, data_base, kTagTestSupport,
                                       kTagTestSignal);
    const double mult = median_of(cfg.lambda_grid);

    for (Algorithm alg : cfg.algorithms) {
      const ComplexMatrix& a =
          algorithm_needs_params(alg) && alg != Algorithm::kLearned ? net.a : a_iid;
      std::vector<ComplexMatrix> y_test;
      y_test.reserve(x_test.size());
      for (int t = 0; t < cfg.test_samples; ++t) {
        const ComplexMatrix& a_used = alg == Algorithm::kLearned ? net.a : a;
        y_test.push_back(measure_sample(a_used, x_test[t], sc, noise_base,
                                        kTagTestNoise, t));
      }

      // Warm-up recovery, discarded.
      (void)recover(alg, a, y_test[0], mult, cfg, sc, have_net ? &net : nullptr);

      std::vector<double> times;
      std::vector<ComplexMatrix> estimates(x_test.size());
      const int passes =
          std::max(1, (cfg.timing_reps + cfg.test_samples - 1) / cfg.test_samples);
      for (int pass = 0; pass < passes; ++pass) {
        for (int t = 0; t < cfg.test_samples; ++t) {
          Recovery rec = recover(alg, a, y_test[t], mult, cfg, sc,
                                 have_net ? &net : nullptr);
          times.push_back(rec.seconds);
          if (pass == 0) estimates[t] = std::move(rec.x_hat);
        }
      }

      ReportRow row = base_row(cfg, sc, alg);
      row.lambda = alg == Algorithm::kLearned ? net.arch.lambda : mult;
      if (alg == Algorithm::kLearned) {
        row.u = net.arch.unrolled_layers;
        row.v = net.arch.correction_layers;
      }
      row.mse = eval_mse(x_test, estimates, sc.n, cfg.test_samples);
      row.wall_time_s = median_of(std::move(times));
      report.rows.push_back(std::move(row));
    }
  }
  if (!cfg.output.empty()) {
    std::ofstream os(cfg.output);
    if (os) os << report_to_csv(report);
  }
  return report;
}

}  // namespace jsr
