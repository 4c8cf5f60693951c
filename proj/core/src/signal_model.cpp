#include "jsr/signal_model.hpp"

#include <cmath>
#include <string>

namespace jsr {

void SparsityConfig::validate() const {
  if (n < 1) throw ConfigError("SparsityConfig: n must be >= 1");
  if (mode == SparsityMode::kIid) {
    if (p < 0.0 || p > 1.0) throw ConfigError("SparsityConfig: p must be in [0, 1]");
  } else {
    if (groups < 1) throw ConfigError("SparsityConfig: groups must be >= 1");
    if (n % groups != 0) {
      throw ConfigError("SparsityConfig: groups must divide n (n=" + std::to_string(n) +
                        ", groups=" + std::to_string(groups) + ")");
    }
  }
}

void NoiseModel::validate() const {
  if (sigma2 < 0.0 || !std::isfinite(sigma2)) {
    throw ConfigError("NoiseModel: sigma2 must be finite and >= 0");
  }
}

Support gen_support(const SparsityConfig& cfg, RngStream& rng) {
  cfg.validate();
  Support s;
  if (cfg.mode == SparsityMode::kIid) {
    for (int i = 0; i < cfg.n; ++i) {
      if (rng.uniform() < cfg.p) s.active.push_back(i);
    }
  } else {
    const int size = cfg.n / cfg.groups;
    int g = static_cast<int>(rng.uniform() * cfg.groups);
    if (g >= cfg.groups) g = cfg.groups - 1;
    for (int i = g * size; i < (g + 1) * size; ++i) s.active.push_back(i);
  }
  return s;
}

ComplexMatrix gen_signals(const Support& support, int n, int m, RngStream& rng) {
  ComplexMatrix x = ComplexMatrix::zero(n, m);
  const double scale = std::sqrt(0.5);
  for (int i : support.active) {
    if (i < 0 || i >= n) throw ConfigError("gen_signals: support index out of range");
    for (int j = 0; j < m; ++j) {
      x.re(i, j) = scale * rng.normal();
      x.im(i, j) = scale * rng.normal();
    }
  }
  return x;
}

ComplexMatrix gen_measurement_matrix(int l, int n, RngStream& rng, bool normalize) {
  if (l < 1 || n < 1) throw ConfigError("gen_measurement_matrix: dimensions must be >= 1");
  ComplexMatrix a = ComplexMatrix::zero(l, n);
  const double scale = std::sqrt(0.5);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < l; ++i) {
      a.re(i, j) = scale * rng.normal();
      a.im(i, j) = scale * rng.normal();
    }
  }
  if (normalize) {
    const double target = std::sqrt(static_cast<double>(l));
    for (int j = 0; j < n; ++j) {
      const double norm = std::sqrt(a.col_squared_norm(j));
      if (norm > 0.0) {
        a.re.col(j) *= target / norm;
        a.im.col(j) *= target / norm;
      }
    }
  }
  return a;
}

ComplexMatrix gen_noise(Eigen::Index rows, Eigen::Index cols, double sigma2, RngStream& rng) {
  ComplexMatrix z = ComplexMatrix::zero(rows, cols);
  if (sigma2 == 0.0) return z;
  const double scale = std::sqrt(sigma2 / 2.0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      z.re(i, j) = scale * rng.normal();
      z.im(i, j) = scale * rng.normal();
    }
  }
  return z;
}

ComplexMatrix measure(const ComplexMatrix& a, const ComplexMatrix& x,
                      const NoiseModel& noise, RngStream& rng) {
  noise.validate();
  ComplexMatrix y = complex_matmul(a, x);
  if (noise.sigma2 > 0.0) {
    ComplexMatrix z = gen_noise(y.rows(), y.cols(), noise.sigma2, rng);
    y.re += z.re;
    y.im += z.im;
  }
  return y;
}

}  // namespace jsr
