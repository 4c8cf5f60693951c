#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jsr/complex_matrix.hpp"

namespace jsr {

// min_X  (1/2) ||A X - Y||_F^2 + lambda * sum_i ||X_{i,:}||_2
struct GroupLassoProblem {
  ComplexMatrix a;  // L x N
  ComplexMatrix y;  // L x M
  double lambda = 0.0;

  void validate() const;
};

enum class StepForm { kInvSqrt, kInvPow, kConstant };

// Diminishing step size for the parallel updates: positive, tending to zero,
// with divergent sum and convergent sum of squares. kConstant is for
// diagnostics only and does not satisfy those conditions.
struct StepSchedule {
  StepForm form = StepForm::kInvPow;
  double gamma0 = 1.0;
  double delta = 0.6;  // exponent for kInvPow, must lie in (0.5, 1]

  double at(int k) const;  // k >= 1
  void validate() const;
};

struct SolverOptions {
  int k_max = 200;
  double stop_tol = 1e-8;
  StepSchedule schedule{};
  // When set, per-iteration recovery MSE against this truth is recorded.
  const ComplexMatrix* truth = nullptr;
};

struct SolverResult {
  ComplexMatrix x_hat;
  std::vector<double> objective_history;  // objective value after each iteration
  std::vector<double> mse_history;        // filled when truth was supplied
  int iterations_run = 0;
  double wall_time_s = 0.0;
  bool diverged = false;
};

// Scalar shrinkage: x - lambda*eta above the threshold, 0 inside it,
// x + lambda*eta below.
double soft_threshold(double x, double eta, double lambda);

double group_lasso_objective(const GroupLassoProblem& p, const ComplexMatrix& x);

// Candidate update for row i given the current iterate x:
//   w = ||A_{:,i}||^2 x_{i,:} - A_{:,i}^H (A x - Y)
// shrunk to (w/||w||) * f(||w||/||A_{:,i}||^2, 1/||A_{:,i}||^2).
// Returns the zero row when ||w|| <= lambda (including w = 0). This is the
// exact minimizer of the objective restricted to row i.
ComplexMatrix row_update(const GroupLassoProblem& p, const ComplexMatrix& x, int i);

// Sequential block-coordinate descent: each iteration sweeps rows 0..N-1,
// updating the iterate in place. Objective is nonincreasing.
SolverResult bcd_mmv(const GroupLassoProblem& p, const SolverOptions& opts);

// Parallel coordinate descent: each iteration computes all candidate rows
// from the same previous iterate, then convex-combines with step gamma_k.
SolverResult pcd_mmv(const GroupLassoProblem& p, const SolverOptions& opts);

// One parallel candidate pass shared by pcd_mmv and the unrolled network.
// state and y may stack several samples side by side in blocks of
// m_per_sample columns; row norms and shrinkage act per (row, sample)
// segment. When trace buffers are supplied they receive the residual
// A*state - y, the pre-shrinkage rows w, and the segment norms (n x batch).
struct PcdIterationTrace {
  ComplexMatrix residual;  // L x (m*batch)
  ComplexMatrix w;         // N x (m*batch)
  Matrix norms;            // N x batch
};
ComplexMatrix pcd_iterate(const ComplexMatrix& a, const Vector& col_sq_norms,
                          double lambda, double gamma, int m_per_sample,
                          const ComplexMatrix& state, const ComplexMatrix& y,
                          PcdIterationTrace* trace = nullptr);

struct AmpOptions {
  double access_prob = 0.1;  // assumed i.i.d. activity probability
  int k_max = 200;
};

// Simplified iterative baseline: Onsager-corrected matched filtering with a
// row-wise group soft-threshold denoiser. A stand-in for externally published
// MMV-AMP variants, kept here for reporting only; no accuracy contract.
SolverResult amp_mmv_baseline(const ComplexMatrix& a, const ComplexMatrix& y,
                              const AmpOptions& opts);

// max_i ||A_{:,i}^H Y||_2; at or above this lambda the zero matrix is optimal.
double kkt_zero_threshold(const ComplexMatrix& a, const ComplexMatrix& y);

struct SolverRunMeta {
  std::string alg;
  int n = 0, l = 0, m = 0;
  double lambda = 0.0;
  int k_max = 0;
  StepSchedule schedule{};
  std::uint64_t seed = 0;
  std::optional<double> mse;
};

std::string solver_result_to_json(const SolverResult& result, const SolverRunMeta& meta);

std::string step_form_name(StepForm form);
StepForm step_form_from_name(const std::string& name);

}  // namespace jsr
