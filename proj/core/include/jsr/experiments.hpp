#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jsr/signal_model.hpp"
#include "jsr/solvers.hpp"
#include "jsr/training.hpp"
#include "jsr/unrolled_net.hpp"

namespace jsr {

enum class Algorithm { kBcd, kPcd, kAmp, kLearned, kGroupLassoDl, kAmpDl };

Algorithm algorithm_from_name(const std::string& name);
std::string algorithm_name(Algorithm alg);
bool algorithm_needs_params(Algorithm alg);

struct ScenarioConfig {
  int n = 0, l = 0, m = 0;
  SparsityMode mode = SparsityMode::kIid;
  double p = 0.1;
  int groups = 1;
  double sigma2 = 0.1;
  bool normalize_pilots = false;

  SparsityConfig sparsity() const;
  double p_or_g() const;  // p in iid mode, group count in grouped mode
  std::string id() const;
  void validate() const;
};

struct SeedConfig {
  std::uint64_t data = 1, noise = 2, init = 3;
};

struct SweepSpec {
  std::string kind;  // "ratio" (L/N grid) or "p" (access probability grid)
  std::vector<double> values;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<Algorithm> algorithms = {Algorithm::kBcd};
  std::vector<double> lambda_grid = {0.01, 0.02, 0.05, 0.1, 0.2};
  int test_samples = 1000;  // T
  SeedConfig seeds;
  int k_max = 200;
  double stop_tol = 1e-8;
  StepSchedule schedule{};
  int net_u = 20, net_v = 3, net_hidden = 0;
  TrainingConfig train;               // train.epochs == 0 disables training
  double train_lambda_scale = 0.1;    // net lambda = scale * median threshold
  std::string output;
  std::optional<SweepSpec> sweep;
  std::string params_path;            // checkpoint for learned / *_dl rows
  int validation_samples = 100;       // held-out set for lambda tuning
  int timing_reps = 5;

  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

inline constexpr const char* kReportHeader =
    "scenario_id,alg,N,L,M,p_or_G,lambda,k_max,U,V,mse,wall_time_s,seed";

struct ReportRow {
  std::string scenario_id;
  std::string alg;
  int n = 0, l = 0, m = 0;
  double p_or_g = 0.0;
  // Tuned grid multiplier on the per-instance zero-solution threshold for the
  // solver algorithms; the network's absolute lambda for learned rows.
  double lambda = 0.0;
  int k_max = 0;
  int u = 0, v = 0;
  double mse = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
};

std::string report_to_csv(const ExperimentReport& report);
ExperimentReport report_from_csv(const std::string& text);

// (1/(N*T)) * sum_t ||x_true[t] - x_hat[t]||_F^2.
double eval_mse(const std::vector<ComplexMatrix>& x_true,
                const std::vector<ComplexMatrix>& x_hat, int n, int t);

// scale * median over calibration draws of the zero-solution threshold for
// measurements taken with matrix a. Used to pin the network's lambda.
double calibrate_net_lambda(const ScenarioConfig& scenario, const ComplexMatrix& a,
                            double scale, const RngStream& base, int draws = 32);

// Jointly trains encoder and correction layers for the given scenario.
// Initial weights come from seeds.init; the net lambda is calibrated first.
TrainResult train_for_scenario(const ExperimentConfig& cfg,
                               const ScenarioConfig& scenario);

// Pilot matrix plus measured sample set for the configured scenario, as
// written by the gen subcommand.
struct GeneratedSet {
  ComplexMatrix a;
  std::vector<ComplexMatrix> x, y;
};
GeneratedSet gen_scenario_set(const ExperimentConfig& cfg, int count);

struct ConvergenceStudy {
  ExperimentReport report;       // one row per algorithm; wall_time_s is the
                                 // mean per-iteration time in seconds
  std::string curves_csv;        // header k,alg,mse
};

// Runs the sequential and parallel solvers to k_max on T instances of the
// configured scenario and averages the recovery MSE at each iteration.
ConvergenceStudy run_convergence_study(const ExperimentConfig& cfg);

// MSE over T test samples for every configured algorithm at each grid point.
// kind overrides cfg.sweep when non-empty. Lambda multipliers are tuned per
// (algorithm, grid point) on a separate validation set.
ExperimentReport run_mse_sweep(const ExperimentConfig& cfg, const std::string& kind = "");

// Median wall time of one full recovery per algorithm per grid point; sample
// generation excluded, first recovery treated as warm-up and discarded.
ExperimentReport run_timing_bench(const ExperimentConfig& cfg);

}  // namespace jsr
