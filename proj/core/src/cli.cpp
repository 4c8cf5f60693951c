#include "jsr/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "jsr/experiments.hpp"

namespace jsr {
namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << text;
}

std::string sample_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d.txt", prefix, index);
  return buf;
}

int run_gen(const std::string& config_path, const std::string& out_dir, int count) {
  ExperimentConfig cfg = load_config(config_path);
  if (count <= 0) count = cfg.test_samples;
  const GeneratedSet set = gen_scenario_set(cfg, count);

  fs::create_directories(out_dir);
  save_matrix(set.a, (fs::path(out_dir) / "A.txt").string());
  for (int t = 0; t < count; ++t) {
    save_matrix(set.x[t], (fs::path(out_dir) / sample_name("x", t)).string());
    save_matrix(set.y[t], (fs::path(out_dir) / sample_name("y", t)).string());
  }
  std::ostringstream manifest;
  manifest << "{\n  \"scenario_id\": \"" << cfg.scenario.id() << "\",\n  \"count\": "
           << count << ",\n  \"sigma2\": " << cfg.scenario.sigma2 << "\n}\n";
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.str());
  std::cout << "wrote " << count << " samples to " << out_dir << '\n';
  return 0;
}

int run_solve(const std::string& config_path, const std::string& alg_name,
              double lambda_mult, const std::string& result_path,
              const std::string& report_path) {
  ExperimentConfig cfg = load_config(config_path);
  const Algorithm alg = algorithm_from_name(alg_name);
  cfg.algorithms = {alg};
  if (algorithm_needs_params(alg) && cfg.params_path.empty()) {
    throw ConfigError("solve: algorithm " + alg_name + " requires params_path");
  }

  const GeneratedSet set = gen_scenario_set(cfg, 1);
  ComplexMatrix a = set.a;
  NetworkParams net;
  if (algorithm_needs_params(alg)) {
    net = load_params(cfg.params_path);
    if (net.arch.n != cfg.scenario.n || net.arch.l != cfg.scenario.l ||
        net.arch.m != cfg.scenario.m) {
      throw ConfigError("solve: checkpoint dimensions do not match scenario");
    }
    a = net.a;
  }
  RngStream noise_rng = RngStream(cfg.seeds.noise, 0).derive(900);
  const ComplexMatrix y =
      measure(a, set.x[0], NoiseModel{cfg.scenario.sigma2}, noise_rng);

  if (lambda_mult <= 0.0) {
    std::vector<double> grid = cfg.lambda_grid;
    std::sort(grid.begin(), grid.end());
    lambda_mult = grid[grid.size() / 2];
  }
  const double lambda = lambda_mult * kkt_zero_threshold(a, y);

  SolverOptions opts;
  opts.k_max = cfg.k_max;
  opts.stop_tol = cfg.stop_tol;
  opts.schedule = cfg.schedule;
  opts.truth = &set.x[0];

  SolverResult result;
  SolverRunMeta meta;
  meta.alg = alg_name;
  meta.n = cfg.scenario.n;
  meta.l = cfg.scenario.l;
  meta.m = cfg.scenario.m;
  meta.k_max = cfg.k_max;
  meta.schedule = cfg.schedule;
  meta.seed = cfg.seeds.data;
  meta.lambda = lambda;

  switch (alg) {
    case Algorithm::kBcd:
    case Algorithm::kGroupLassoDl:
      result = bcd_mmv({a, y, lambda}, opts);
      break;
    case Algorithm::kPcd:
      result = pcd_mmv({a, y, lambda}, opts);
      break;
    case Algorithm::kAmp:
    case Algorithm::kAmpDl: {
      AmpOptions amp;
      amp.access_prob = cfg.scenario.mode == SparsityMode::kIid
                            ? cfg.scenario.p
                            : 1.0 / cfg.scenario.groups;
      amp.k_max = cfg.k_max;
      result = amp_mmv_baseline(a, y, amp);
      meta.lambda = 0.0;
      break;
    }
    case Algorithm::kLearned: {
      const auto t0 = std::chrono::steady_clock::now();
      result.x_hat = correction_forward(net, approximation_forward(net, y));
      result.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      meta.lambda = net.arch.lambda;
      break;
    }
  }
  const double mse =
      (result.x_hat - set.x[0]).squared_frobenius() / cfg.scenario.n;
  meta.mse = mse;

  ExperimentReport report;
  ReportRow row;
  row.scenario_id = cfg.scenario.id();
  row.alg = alg_name;
  row.n = cfg.scenario.n;
  row.l = cfg.scenario.l;
  row.m = cfg.scenario.m;
  row.p_or_g = cfg.scenario.p_or_g();
  row.lambda = alg == Algorithm::kLearned ? net.arch.lambda : lambda_mult;
  row.k_max = alg == Algorithm::kLearned ? 0 : cfg.k_max;
  if (alg == Algorithm::kLearned) {
    row.u = net.arch.unrolled_layers;
    row.v = net.arch.correction_layers;
  }
  row.mse = mse;
  row.wall_time_s = result.wall_time_s;
  row.seed = cfg.seeds.data;
  report.rows.push_back(row);

  std::cout << report_to_csv(report);
  if (!report_path.empty()) write_text(report_path, report_to_csv(report));
  if (!result_path.empty()) write_text(result_path, solver_result_to_json(result, meta));
  return 0;
}

int run_train(const std::string& config_path, const std::string& params_out,
              const std::string& curve_out) {
  ExperimentConfig cfg = load_config(config_path);
  if (cfg.train.epochs < 1) throw ConfigError("train: train.epochs must be >= 1");
  const TrainResult result = train_for_scenario(cfg, cfg.scenario);

  std::string out = params_out;
  if (out.empty()) out = cfg.output.empty() ? "params.json" : cfg.output;
  save_params(result.params, out);
  if (!curve_out.empty()) write_text(curve_out, curve_to_csv(result.curve));
  if (!result.curve.empty()) {
    std::cout << "final train_loss " << result.curve.back().train_loss << ", eval_mse "
              << result.curve.back().eval_mse << '\n';
  }
  std::cout << "params written to " << out << '\n';
  return 0;
}

int run_eval(const std::string& config_path, const std::string& params_path,
             const std::string& alg_name, const std::string& report_path) {
  ExperimentConfig cfg = load_config(config_path);
  if (!params_path.empty()) cfg.params_path = params_path;
  cfg.algorithms = {algorithm_from_name(alg_name)};
  cfg.train.epochs = 0;  // eval never trains

  SweepSpec spec;
  spec.kind = "ratio";
  spec.values = {static_cast<double>(cfg.scenario.l) / cfg.scenario.n};
  cfg.sweep = spec;
  if (!report_path.empty()) cfg.output = report_path;

  const ExperimentReport report = run_mse_sweep(cfg, "ratio");
  std::cout << report_to_csv(report);
  return 0;
}

int run_bench(const std::string& config_path, const std::string& study,
              const std::string& sweep_kind, const std::string& out_path,
              const std::string& curves_path) {
  ExperimentConfig cfg = load_config(config_path);
  if (!out_path.empty()) cfg.output = out_path;

  ExperimentReport report;
  if (study == "convergence") {
    const ConvergenceStudy result = run_convergence_study(cfg);
    report = result.report;
    if (!curves_path.empty()) write_text(curves_path, result.curves_csv);
  } else if (study == "sweep") {
    report = run_mse_sweep(cfg, sweep_kind);
  } else if (study == "timing") {
    report = run_timing_bench(cfg);
  } else {
    throw ConfigError("bench: unknown study \"" + study +
                      "\" (expected convergence, sweep or timing)");
  }
  if (!cfg.output.empty()) write_text(cfg.output, report_to_csv(report));
  std::cout << report_to_csv(report);
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Jointly sparse signal recovery: solvers, unrolled decoder, experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "data", alg = "bcd", params_path, result_path;
  std::string report_path, curve_path, study = "convergence", sweep_kind, curves_path;
  double lambda_mult = 0.0;
  int count = 0;

  auto* gen = app.add_subcommand("gen", "Write a scenario sample set to a directory");
  gen->add_option("--config", config_path, "JSON config path")->required();
  gen->add_option("--out", out_dir, "Output directory");
  gen->add_option("--count", count, "Sample count (default: config T)");

  auto* solve = app.add_subcommand("solve", "Recover one instance with one algorithm");
  solve->add_option("--config", config_path, "JSON config path")->required();
  solve->add_option("--alg", alg, "bcd|pcd|amp|learned|group_lasso_dl|amp_dl");
  solve->add_option("--lambda-mult", lambda_mult,
                    "Multiplier on the zero-solution threshold (default: grid median)");
  solve->add_option("--out", result_path, "Write solver result JSON here");
  solve->add_option("--report", report_path, "Write the report row CSV here");

  auto* train_cmd = app.add_subcommand("train", "Train encoder and correction layers");
  train_cmd->add_option("--config", config_path, "JSON config path")->required();
  train_cmd->add_option("--params-out", params_path, "Checkpoint path (default params.json)");
  train_cmd->add_option("--curve", curve_path, "Write the loss curve CSV here");

  auto* eval_cmd = app.add_subcommand("eval", "Test-set MSE for a trained checkpoint");
  eval_cmd->add_option("--config", config_path, "JSON config path")->required();
  eval_cmd->add_option("--params", params_path, "Checkpoint path");
  eval_cmd->add_option("--alg", alg, "Algorithm to evaluate (default from --alg)");
  eval_cmd->add_option("--report", report_path, "Write the report CSV here");

  auto* bench = app.add_subcommand("bench", "Convergence, MSE sweep or timing study");
  bench->add_option("--config", config_path, "JSON config path")->required();
  bench->add_option("--study", study, "convergence|sweep|timing");
  bench->add_option("--sweep", sweep_kind, "Sweep kind: ratio|p");
  bench->add_option("--out", report_path, "Report CSV path");
  bench->add_option("--curves", curves_path, "Curves CSV path (convergence study)");

  std::vector<const char*> argv;
  argv.push_back("jsr");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (gen->parsed()) return run_gen(config_path, out_dir, count);
    if (solve->parsed())
      return run_solve(config_path, alg, lambda_mult, result_path, report_path);
    if (train_cmd->parsed()) return run_train(config_path, params_path, curve_path);
    if (eval_cmd->parsed())
      return run_eval(config_path, params_path, alg, report_path);
    if (bench->parsed())
      return run_bench(config_path, study, sweep_kind, report_path, curves_path);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace jsr
