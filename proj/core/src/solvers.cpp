#include "jsr/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

namespace jsr {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double relative_change(double prev, double cur) {
  return std::abs(prev - cur) / std::max(std::abs(prev), 1e-12);
}

// Recovery MSE of a single estimate: (1/N) ||x_hat - truth||_F^2.
double iterate_mse(const ComplexMatrix& x_hat, const ComplexMatrix& truth) {
  return (x_hat - truth).squared_frobenius() / static_cast<double>(x_hat.rows());
}

}  // namespace

void GroupLassoProblem::validate() const {
  if (a.rows() != y.rows()) {
    throw ShapeError("GroupLassoProblem: A and Y row counts differ");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("GroupLassoProblem: lambda must be finite and >= 0");
  }
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (a.col_squared_norm(j) <= 0.0) {
      throw ConfigError("GroupLassoProblem: column " + std::to_string(j) +
                        " of A has zero norm");
    }
  }
}

double StepSchedule::at(int k) const {
  switch (form) {
    case StepForm::kInvSqrt:
      return gamma0 / std::sqrt(static_cast<double>(k));
    case StepForm::kInvPow:
      return gamma0 * std::pow(static_cast<double>(k), -delta);
    case StepForm::kConstant:
      return gamma0;
  }
  return gamma0;
}

void StepSchedule::validate() const {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) {
    throw ConfigError("StepSchedule: gamma0 must be finite and > 0");
  }
  if (form == StepForm::kInvPow && !(delta > 0.5 && delta <= 1.0)) {
    throw ConfigError("StepSchedule: delta must lie in (0.5, 1]");
  }
}

double soft_threshold(double x, double eta, double lambda) {
  const double t = lambda * eta;
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double group_lasso_objective(const GroupLassoProblem& p, const ComplexMatrix& x) {
  const ComplexMatrix r = complex_matmul(p.a, x) - p.y;
  double row_norms = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) row_norms += x.row_norm(i);
  return 0.5 * r.squared_frobenius() + p.lambda * row_norms;
}

ComplexMatrix row_update(const GroupLassoProblem& p, const ComplexMatrix& x, int i) {
  if (i < 0 || i >= x.rows()) throw ShapeError("row_update: row index out of range");
  const ComplexMatrix r = complex_matmul(p.a, x) - p.y;
  const double c = p.a.col_squared_norm(i);

  // w = c * x_{i,:} - A_{:,i}^H r
  Eigen::RowVectorXd u_re = p.a.re.col(i).transpose() * r.re + p.a.im.col(i).transpose() * r.im;
  Eigen::RowVectorXd u_im = p.a.re.col(i).transpose() * r.im - p.a.im.col(i).transpose() * r.re;
  Eigen::RowVectorXd w_re = c * x.re.row(i) - u_re;
  Eigen::RowVectorXd w_im = c * x.im.row(i) - u_im;

  const double norm = std::sqrt(w_re.squaredNorm() + w_im.squaredNorm());
  ComplexMatrix out = ComplexMatrix::zero(1, x.cols());
  const double shrunk = soft_threshold(norm / c, 1.0 / c, p.lambda);
  if (norm > 0.0 && shrunk > 0.0) {
    out.re = w_re * (shrunk / norm);
    out.im = w_im * (shrunk / norm);
  }
  return out;
}

SolverResult bcd_mmv(const GroupLassoProblem& p, const SolverOptions& opts) {
  p.validate();
  const auto n = p.a.cols();
  const auto m = p.y.cols();
  const Vector c = col_squared_norms(p.a);

  SolverResult res;
  res.x_hat = ComplexMatrix::zero(n, m);
  ComplexMatrix& x = res.x_hat;

  const auto t0 = Clock::now();
  // Residual A x - y, maintained by rank-1 updates within a sweep and
  // recomputed from scratch once per sweep to bound drift.
  ComplexMatrix r{-p.y.re, -p.y.im};
  double prev_obj = 0.0;
  bool have_prev = false;

  Eigen::RowVectorXd u_re(m), u_im(m), w_re(m), w_im(m), d_re(m), d_im(m);
  for (int k = 1; k <= opts.k_max; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ci = c(i);
      u_re.noalias() = p.a.re.col(i).transpose() * r.re;
      u_re.noalias() += p.a.im.col(i).transpose() * r.im;
      u_im.noalias() = p.a.re.col(i).transpose() * r.im;
      u_im.noalias() -= p.a.im.col(i).transpose() * r.re;
      w_re = ci * x.re.row(i) - u_re;
      w_im = ci * x.im.row(i) - u_im;

      const double norm = std::sqrt(w_re.squaredNorm() + w_im.squaredNorm());
      const double shrunk = soft_threshold(norm / ci, 1.0 / ci, p.lambda);
      if (norm > 0.0 && shrunk > 0.0) {
        const double s = shrunk / norm;
        d_re = s * w_re - x.re.row(i);
        d_im = s * w_im - x.im.row(i);
      } else {
        d_re = -x.re.row(i);
        d_im = -x.im.row(i);
      }
      if (d_re.squaredNorm() + d_im.squaredNorm() > 0.0) {
        x.re.row(i) += d_re;
        x.im.row(i) += d_im;
        r.re.noalias() += p.a.re.col(i) * d_re;
        r.re.noalias() -= p.a.im.col(i) * d_im;
        r.im.noalias() += p.a.im.col(i) * d_re;
        r.im.noalias() += p.a.re.col(i) * d_im;
      }
    }

    r = complex_matmul(p.a, x) - p.y;
    double row_norms = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) row_norms += x.row_norm(i);
    const double obj = 0.5 * r.squared_frobenius() + p.lambda * row_norms;
    if (!std::isfinite(obj)) {
      throw NumericError("bcd_mmv: non-finite objective at iteration " + std::to_string(k));
    }
    res.objective_history.push_back(obj);
    if (opts.truth) res.mse_history.push_back(iterate_mse(x, *opts.truth));
    res.iterations_run = k;
    if (have_prev && relative_change(prev_obj, obj) < opts.stop_tol) break;
    prev_obj = obj;
    have_prev = true;
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

ComplexMatrix pcd_iterate(const ComplexMatrix& a, const Vector& col_sq_norms,
                          double lambda, double gamma, int m_per_sample,
                          const ComplexMatrix& state, const ComplexMatrix& y,
                          PcdIterationTrace* trace) {
  const auto n = state.rows();
  const auto total_cols = state.cols();
  if (total_cols % m_per_sample != 0) {
    throw ShapeError("pcd_iterate: column count not a multiple of m_per_sample");
  }
  const auto batch = total_cols / m_per_sample;

  ComplexMatrix r = complex_matmul(a, state) - y;
  ComplexMatrix u = adjoint_matmul(a, r);
  ComplexMatrix w;
  w.re = (state.re.array().colwise() * col_sq_norms.array()).matrix() - u.re;
  w.im = (state.im.array().colwise() * col_sq_norms.array()).matrix() - u.im;

  Matrix norms(n, batch);
  ComplexMatrix candidate = ComplexMatrix::zero(n, total_cols);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto c0 = b * m_per_sample;
    auto wre = w.re.middleCols(c0, m_per_sample);
    auto wim = w.im.middleCols(c0, m_per_sample);
    norms.col(b) = (wre.array().square().rowwise().sum() +
                    wim.array().square().rowwise().sum())
                       .sqrt()
                       .matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double nn = norms(i, b);
      if (nn > lambda && nn > 0.0) {
        const double s = (nn - lambda) / (col_sq_norms(i) * nn);
        candidate.re.block(i, c0, 1, m_per_sample) = s * wre.row(i);
        candidate.im.block(i, c0, 1, m_per_sample) = s * wim.row(i);
      }
    }
  }

  ComplexMatrix next;
  next.re = gamma * candidate.re + (1.0 - gamma) * state.re;
  next.im = gamma * candidate.im + (1.0 - gamma) * state.im;
  if (trace) {
    trace->residual = std::move(r);
    trace->w = std::move(w);
    trace->norms = std::move(norms);
  }
  return next;
}

SolverResult pcd_mmv(const GroupLassoProblem& p, const SolverOptions& opts) {
  p.validate();
  opts.schedule.validate();
  const auto n = p.a.cols();
  const auto m = p.y.cols();
  const Vector c = col_squared_norms(p.a);

  SolverResult res;
  res.x_hat = ComplexMatrix::zero(n, m);

  const auto t0 = Clock::now();
  double prev_obj = 0.0;
  bool have_prev = false;
  for (int k = 1; k <= opts.k_max; ++k) {
    res.x_hat = pcd_iterate(p.a, c, p.lambda, opts.schedule.at(k),
                            static_cast<int>(m), res.x_hat, p.y);
    const double obj = group_lasso_objective(p, res.x_hat);
    if (!std::isfinite(obj)) {
      throw NumericError("pcd_mmv: non-finite objective at iteration " + std::to_string(k));
    }
    res.objective_history.push_back(obj);
    if (opts.truth) res.mse_history.push_back(iterate_mse(res.x_hat, *opts.truth));
    res.iterations_run = k;
    if (have_prev && relative_change(prev_obj, obj) < opts.stop_tol) break;
    prev_obj = obj;
    have_prev = true;
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

SolverResult amp_mmv_baseline(const ComplexMatrix& a, const ComplexMatrix& y,
                              const AmpOptions& opts) {
  const auto l = a.rows();
  const auto n = a.cols();
  const auto m = y.cols();
  const Vector c = col_squared_norms(a);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (c(j) <= 0.0) throw ConfigError("amp_mmv_baseline: zero column in A");
  }

  const double p_clamped = std::clamp(opts.access_prob, 1e-3, 0.9);
  const double kappa = std::sqrt(2.0 * std::log(1.0 / p_clamped));
  const double d = 2.0 * static_cast<double>(m);  // real coordinates per row

  SolverResult res;
  res.x_hat = ComplexMatrix::zero(n, m);
  ComplexMatrix r = y;
  const double r0 = std::max(r.squared_frobenius(), 1e-300);

  const auto t0 = Clock::now();
  for (int k = 1; k <= opts.k_max; ++k) {
    const double sigma = std::sqrt(r.squared_frobenius() /
                                   static_cast<double>(l * m));
    const double tau = kappa * sigma;

    ComplexMatrix u = adjoint_matmul(a, r);
    ComplexMatrix z;
    z.re = res.x_hat.re + (u.re.array().colwise() / c.array()).matrix();
    z.im = res.x_hat.im + (u.im.array().colwise() / c.array()).matrix();

    double div_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double nz = std::sqrt(z.re.row(i).squaredNorm() + z.im.row(i).squaredNorm());
      if (nz > tau && nz > 0.0) {
        const double s = 1.0 - tau / nz;
        res.x_hat.re.row(i) = s * z.re.row(i);
        res.x_hat.im.row(i) = s * z.im.row(i);
        div_sum += d - (d - 1.0) * tau / nz;
      } else {
        res.x_hat.re.row(i).setZero();
        res.x_hat.im.row(i).setZero();
      }
    }

    const double onsager = div_sum / (static_cast<double>(l) * d);
    ComplexMatrix fit = complex_matmul(a, res.x_hat);
    ComplexMatrix r_next;
    r_next.re = y.re - fit.re + onsager * r.re;
    r_next.im = y.im - fit.im + onsager * r.im;
    r = std::move(r_next);

    const double fit_obj = 0.5 * (fit - y).squared_frobenius();
    if (!std::isfinite(fit_obj)) {
      throw NumericError("amp_mmv_baseline: non-finite residual at iteration " +
                         std::to_string(k));
    }
    res.objective_history.push_back(fit_obj);
    res.iterations_run = k;
    if (r.squared_frobenius() > 10.0 * r0) {
      res.diverged = true;
      break;
    }
  }
  res.wall_time_s = seconds_since(t0);
  return res;
}

double kkt_zero_threshold(const ComplexMatrix& a, const ComplexMatrix& y) {
  const ComplexMatrix u = adjoint_matmul(a, y);
  double best = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) best = std::max(best, u.row_norm(i));
  return best;
}

std::string step_form_name(StepForm form) {
  switch (form) {
    case StepForm::kInvSqrt: return "inv_sqrt";
    case StepForm::kInvPow: return "inv_pow";
    case StepForm::kConstant: return "constant";
  }
  return "inv_pow";
}

StepForm step_form_from_name(const std::string& name) {
  if (name == "inv_sqrt") return StepForm::kInvSqrt;
  if (name == "inv_pow") return StepForm::kInvPow;
  if (name == "constant") return StepForm::kConstant;
  throw ConfigError("unknown step schedule form: " + name);
}

std::string solver_result_to_json(const SolverResult& result, const SolverRunMeta& meta) {
  nlohmann::json j;
  j["alg"] = meta.alg;
  j["N"] = meta.n;
  j["L"] = meta.l;
  j["M"] = meta.m;
  j["lambda"] = meta.lambda;
  j["k_max"] = meta.k_max;
  j["schedule"] = {{"form", step_form_name(meta.schedule.form)},
                   {"gamma0", meta.schedule.gamma0},
                   {"delta", meta.schedule.delta}};
  j["objective_history"] = result.objective_history;
  if (meta.mse) j["mse"] = *meta.mse;
  j["wall_time_s"] = result.wall_time_s;
  j["seed"] = meta.seed;
  return j.dump(2);
}

}  // namespace jsr
