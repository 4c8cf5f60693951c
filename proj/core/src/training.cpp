#include "jsr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace jsr {
namespace {

using Clock = std::chrono::steady_clock;

// Substream tags for the purposes drawn inside train().
enum StreamTag : std::uint64_t {
  kTagSupport = 1,
  kTagSignal = 2,
  kTagNoise = 3,
  kTagShuffle = 4,
  kTagEvalSupport = 5,
  kTagEvalSignal = 6,
  kTagEvalNoise = 7,
};

}  // namespace

void TrainingConfig::validate() const {
  if (sample_count < 0) throw ConfigError("TrainingConfig: sample_count must be >= 0");
  if (batch_size < 1) throw ConfigError("TrainingConfig: batch_size must be >= 1");
  if (epochs > 0 && batch_size > std::max(sample_count, 1)) {
    throw ConfigError("TrainingConfig: batch_size must not exceed sample_count");
  }
  if (epochs < 0) throw ConfigError("TrainingConfig: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("TrainingConfig: learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("TrainingConfig: beta1, beta2 must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("TrainingConfig: epsilon must be > 0");
  if (threads < 1) throw ConfigError("TrainingConfig: threads must be >= 1");
}

GradientSet GradientSet::zeros_like(const NetworkParams& params) {
  GradientSet g;
  g.d_a_re = Matrix::Zero(params.a.rows(), params.a.cols());
  g.d_a_im = Matrix::Zero(params.a.rows(), params.a.cols());
  for (const auto* branch : {&params.correction_re, &params.correction_im}) {
    auto& out = (branch == &params.correction_re) ? g.d_correction_re : g.d_correction_im;
    for (const auto& layer : *branch) {
      out.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                     Vector::Zero(layer.bias.size())});
    }
  }
  return g;
}

void GradientSet::accumulate(const GradientSet& other, double weight) {
  d_a_re += weight * other.d_a_re;
  d_a_im += weight * other.d_a_im;
  for (std::size_t j = 0; j < d_correction_re.size(); ++j) {
    d_correction_re[j].weight += weight * other.d_correction_re[j].weight;
    d_correction_re[j].bias += weight * other.d_correction_re[j].bias;
    d_correction_im[j].weight += weight * other.d_correction_im[j].weight;
    d_correction_im[j].bias += weight * other.d_correction_im[j].bias;
  }
}

double mse_loss(const ComplexMatrix& x_true, const ComplexMatrix& x_hat, int count) {
  if (x_true.rows() != x_hat.rows() || x_true.cols() != x_hat.cols()) {
    throw ShapeError("mse_loss: shape mismatch");
  }
  if (count < 1) throw ConfigError("mse_loss: count must be >= 1");
  return (x_true - x_hat).squared_frobenius() /
         (static_cast<double>(x_true.rows()) * count);
}

double mse_loss(const std::vector<ComplexMatrix>& x_true,
                const std::vector<ComplexMatrix>& x_hat) {
  if (x_true.size() != x_hat.size() || x_true.empty()) {
    throw ShapeError("mse_loss: batch sizes differ or empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x_true.size(); ++i) {
    sum += (x_true[i] - x_hat[i]).squared_frobenius() / x_true[i].rows();
  }
  return sum / static_cast<double>(x_true.size());
}

ForwardTrace autoencoder_forward_traced(const NetworkParams& params,
                                        const ComplexMatrix& x_in,
                                        const ComplexMatrix& noise) {
  const int m = params.arch.m;
  if (x_in.rows() != params.arch.n || x_in.cols() % m != 0) {
    throw ShapeError("forward: input is not N x (M*batch)");
  }
  ForwardTrace trace;
  trace.batch = static_cast<int>(x_in.cols() / m);
  trace.x_in = x_in;
  trace.noise = noise;
  trace.y = complex_matmul(params.a, x_in) + noise;

  const Vector c = col_squared_norms(params.a);
  const double lambda = params.arch.lambda;
  trace.min_threshold_margin = std::numeric_limits<double>::infinity();
  trace.min_relu_margin = std::numeric_limits<double>::infinity();

  trace.states.reserve(params.arch.unrolled_layers + 1);
  trace.states.push_back(ComplexMatrix::zero(params.arch.n, x_in.cols()));
  for (int k = 1; k <= params.arch.unrolled_layers; ++k) {
    PcdIterationTrace layer;
    LayerState next = pcd_iterate(params.a, c, lambda, params.arch.schedule.at(k), m,
                                  trace.states.back(), trace.y, &layer);
    if (!next.all_finite()) {
      throw NumericError("forward: non-finite state at layer " + std::to_string(k));
    }
    trace.min_threshold_margin =
        std::min(trace.min_threshold_margin,
                 (layer.norms.array() - lambda).abs().minCoeff());
    trace.states.push_back(std::move(next));
    trace.layers.push_back(std::move(layer));
  }

  const LayerState& final_state = trace.states.back();
  if (params.arch.correction_layers == 0) {
    trace.x_hat = final_state;
    return trace;
  }

  const auto n = final_state.rows();
  const auto batch = trace.batch;
  trace.v0.resize(n * batch, 2 * m);
  for (Eigen::Index b = 0; b < batch; ++b) {
    trace.v0.block(b * n, 0, n, m) = final_state.re.middleCols(b * m, m);
    trace.v0.block(b * n, m, n, m) = final_state.im.middleCols(b * m, m);
  }

  for (const auto* branch : {&params.correction_re, &params.correction_im}) {
    auto& pre = (branch == &params.correction_re) ? trace.pre_re : trace.pre_im;
    Matrix h = trace.v0;
    for (std::size_t j = 0; j < branch->size(); ++j) {
      Matrix z = (h * (*branch)[j].weight.transpose()).rowwise() +
                 (*branch)[j].bias.transpose();
      if (j + 1 < branch->size()) {
        trace.min_relu_margin = std::min(trace.min_relu_margin, z.array().abs().minCoeff());
        h = z.cwiseMax(0.0);
      }
      pre.push_back(std::move(z));
    }
  }

  const Matrix& out_re = trace.pre_re.back();
  const Matrix& out_im = trace.pre_im.back();
  trace.x_hat = ComplexMatrix::zero(n, x_in.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    trace.x_hat.re.middleCols(b * m, m) = out_re.block(b * n, 0, n, m);
    trace.x_hat.im.middleCols(b * m, m) = out_im.block(b * n, 0, n, m);
  }
  if (!trace.x_hat.all_finite()) throw NumericError("forward: non-finite network output");
  return trace;
}

namespace {

// dA accumulation for C = A * X over the real pairs.
void acc_grad_left(Matrix& d_a_re, Matrix& d_a_im, const ComplexMatrix& d_c,
                   const ComplexMatrix& x) {
  d_a_re.noalias() += d_c.re * x.re.transpose();
  d_a_re.noalias() += d_c.im * x.im.transpose();
  d_a_im.noalias() += d_c.im * x.re.transpose();
  d_a_im.noalias() -= d_c.re * x.im.transpose();
}

// Backward of one correction branch. Returns the gradient w.r.t. the shared
// input v0 and accumulates layer gradients.
Matrix branch_backward(const std::vector<DenseLayer>& layers,
                       const std::vector<Matrix>& pre, const Matrix& v0,
                       Matrix d_out, std::vector<DenseLayer>& d_layers) {
  for (int j = static_cast<int>(layers.size()) - 1; j >= 0; --j) {
    const Matrix h_prev = (j == 0) ? v0 : pre[j - 1].cwiseMax(0.0);
    d_layers[j].weight.noalias() += d_out.transpose() * h_prev;
    d_layers[j].bias += d_out.colwise().sum().transpose();
    Matrix d_h = d_out * layers[j].weight;
    if (j == 0) return d_h;
    d_out = d_h.cwiseProduct((pre[j - 1].array() > 0.0).cast<double>().matrix());
  }
  return Matrix::Zero(v0.rows(), v0.cols());  // layers.empty()
}

}  // namespace

GradientSet backward(const NetworkParams& params, const ComplexMatrix& x_true,
                     const ForwardTrace& trace) {
  if (trace.states.empty()) throw ConfigError("backward: missing forward trace");
  if (x_true.rows() != trace.x_hat.rows() || x_true.cols() != trace.x_hat.cols()) {
    throw ShapeError("backward: truth shape mismatch");
  }
  const int m = params.arch.m;
  const int batch = trace.batch;
  const auto n = params.a.cols();
  const double lambda = params.arch.lambda;
  const Vector c = col_squared_norms(params.a);

  GradientSet g = GradientSet::zeros_like(params);
  const double loss_scale = 2.0 / (static_cast<double>(x_true.rows()) * batch);

  ComplexMatrix d_state;
  d_state.re = loss_scale * (trace.x_hat.re - x_true.re);
  d_state.im = loss_scale * (trace.x_hat.im - x_true.im);

  if (params.arch.correction_layers > 0) {
    // Route dX_hat through the two branches back to the shared row inputs.
    Matrix d_out_re(n * batch, m), d_out_im(n * batch, m);
    for (Eigen::Index b = 0; b < batch; ++b) {
      d_out_re.block(b * n, 0, n, m) = d_state.re.middleCols(b * m, m);
      d_out_im.block(b * n, 0, n, m) = d_state.im.middleCols(b * m, m);
    }
    Matrix d_v0 = branch_backward(params.correction_re, trace.pre_re, trace.v0,
                                  std::move(d_out_re), g.d_correction_re);
    d_v0 += branch_backward(params.correction_im, trace.pre_im, trace.v0,
                            std::move(d_out_im), g.d_correction_im);
    d_state = ComplexMatrix::zero(n, trace.x_hat.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
      d_state.re.middleCols(b * m, m) = d_v0.block(b * n, 0, n, m);
      d_state.im.middleCols(b * m, m) = d_v0.block(b * n, m, n, m);
    }
  }

  ComplexMatrix d_y = ComplexMatrix::zero(trace.y.rows(), trace.y.cols());
  Vector d_c = Vector::Zero(n);

  for (int k = params.arch.unrolled_layers; k >= 1; --k) {
    const PcdIterationTrace& layer = trace.layers[k - 1];
    const LayerState& x_prev = trace.states[k - 1];
    const double gamma = params.arch.schedule.at(k);

    ComplexMatrix d_tilde;
    d_tilde.re = gamma * d_state.re;
    d_tilde.im = gamma * d_state.im;
    ComplexMatrix d_prev;
    d_prev.re = (1.0 - gamma) * d_state.re;
    d_prev.im = (1.0 - gamma) * d_state.im;

    // Shrinkage: X~_i = ((n - lambda)/(c_i n)) w_i on each (row, sample)
    // segment, zero where n <= lambda.
    ComplexMatrix d_w = ComplexMatrix::zero(n, d_state.cols());
    for (int b = 0; b < batch; ++b) {
      const auto c0 = b * m;
      auto w_re = layer.w.re.middleCols(c0, m);
      auto w_im = layer.w.im.middleCols(c0, m);
      auto dt_re = d_tilde.re.middleCols(c0, m);
      auto dt_im = d_tilde.im.middleCols(c0, m);
      const Vector dot = (w_re.cwiseProduct(dt_re) + w_im.cwiseProduct(dt_im))
                             .rowwise()
                             .sum();
      Vector coef_lin = Vector::Zero(n);
      Vector coef_rad = Vector::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double nn = layer.norms(i, b);
        if (nn > lambda && nn > 0.0) {
          coef_lin(i) = (1.0 - lambda / nn) / c(i);
          coef_rad(i) = lambda * dot(i) / (c(i) * nn * nn * nn);
          d_c(i) -= (nn - lambda) * dot(i) / (c(i) * c(i) * nn);
        }
      }
      d_w.re.middleCols(c0, m) = (dt_re.array().colwise() * coef_lin.array()).matrix() +
                                 (w_re.array().colwise() * coef_rad.array()).matrix();
      d_w.im.middleCols(c0, m) = (dt_im.array().colwise() * coef_lin.array()).matrix() +
                                 (w_im.array().colwise() * coef_rad.array()).matrix();
    }

    // w = c o x_prev - A^H r
    d_prev.re += (d_w.re.array().colwise() * c.array()).matrix();
    d_prev.im += (d_w.im.array().colwise() * c.array()).matrix();
    d_c += (x_prev.re.cwiseProduct(d_w.re) + x_prev.im.cwiseProduct(d_w.im))
               .rowwise()
               .sum();

    // u = A^H r with du = -dw
    ComplexMatrix d_r;
    d_r.re.noalias() = -(params.a.re * d_w.re);
    d_r.re.noalias() += params.a.im * d_w.im;
    d_r.im.noalias() = -(params.a.im * d_w.re);
    d_r.im.noalias() -= params.a.re * d_w.im;
    g.d_a_re.noalias() -= layer.residual.re * d_w.re.transpose();
    g.d_a_re.noalias() -= layer.residual.im * d_w.im.transpose();
    g.d_a_im.noalias() -= layer.residual.im * d_w.re.transpose();
    g.d_a_im.noalias() += layer.residual.re * d_w.im.transpose();

    // r = A x_prev - y
    acc_grad_left(g.d_a_re, g.d_a_im, d_r, x_prev);
    d_prev.re.noalias() += params.a.re.transpose() * d_r.re;
    d_prev.re.noalias() += params.a.im.transpose() * d_r.im;
    d_prev.im.noalias() += params.a.re.transpose() * d_r.im;
    d_prev.im.noalias() -= params.a.im.transpose() * d_r.re;
    d_y.re -= d_r.re;
    d_y.im -= d_r.im;

    d_state = std::move(d_prev);
  }

  // Encoder y = A x_in + z; the additive noise passes gradients through
  // unchanged and contributes nothing itself.
  acc_grad_left(g.d_a_re, g.d_a_im, d_y, trace.x_in);

  // Column norms c_i feed every layer; fold their gradient into A.
  for (Eigen::Index i = 0; i < n; ++i) {
    g.d_a_re.col(i) += 2.0 * d_c(i) * params.a.re.col(i);
    g.d_a_im.col(i) += 2.0 * d_c(i) * params.a.im.col(i);
  }
  return g;
}

AdamState AdamState::init(const NetworkParams& params) {
  return {GradientSet::zeros_like(params), GradientSet::zeros_like(params), 0};
}

namespace {

void adam_update(Matrix& param, const Matrix& grad, Matrix& m1, Matrix& m2,
                 const TrainingConfig& cfg, double bc1, double bc2) {
  m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
  m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -=
      cfg.learning_rate * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + cfg.epsilon);
}

void adam_update(Vector& param, const Vector& grad, Vector& m1, Vector& m2,
                 const TrainingConfig& cfg, double bc1, double bc2) {
  m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
  m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -=
      cfg.learning_rate * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace

void adam_step(NetworkParams& params, const GradientSet& grads,
               const TrainingConfig& cfg, AdamState& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);

  adam_update(params.a.re, grads.d_a_re, state.first.d_a_re, state.second.d_a_re, cfg,
              bc1, bc2);
  adam_update(params.a.im, grads.d_a_im, state.first.d_a_im, state.second.d_a_im, cfg,
              bc1, bc2);
  for (std::size_t j = 0; j < params.correction_re.size(); ++j) {
    adam_update(params.correction_re[j].weight, grads.d_correction_re[j].weight,
                state.first.d_correction_re[j].weight,
                state.second.d_correction_re[j].weight, cfg, bc1, bc2);
    adam_update(params.correction_re[j].bias, grads.d_correction_re[j].bias,
                state.first.d_correction_re[j].bias,
                state.second.d_correction_re[j].bias, cfg, bc1, bc2);
    adam_update(params.correction_im[j].weight, grads.d_correction_im[j].weight,
                state.first.d_correction_im[j].weight,
                state.second.d_correction_im[j].weight, cfg, bc1, bc2);
    adam_update(params.correction_im[j].bias, grads.d_correction_im[j].bias,
                state.first.d_correction_im[j].bias,
                state.second.d_correction_im[j].bias, cfg, bc1, bc2);
  }
  if (cfg.project_columns) project_encoder_columns(params);
}

void project_encoder_columns(NetworkParams& params) {
  const double target = std::sqrt(static_cast<double>(params.a.rows()));
  for (Eigen::Index j = 0; j < params.a.cols(); ++j) {
    const double norm = std::sqrt(params.a.col_squared_norm(j));
    if (norm > 0.0) {
      params.a.re.col(j) *= target / norm;
      params.a.im.col(j) *= target / norm;
    }
  }
}

namespace {

ComplexMatrix draw_sample(const SparsityConfig& sparsity, int m, const RngStream& base,
                          StreamTag support_tag, StreamTag signal_tag,
                          std::uint64_t index) {
  RngStream sup_rng = base.derive(support_tag, index);
  RngStream sig_rng = base.derive(signal_tag, index);
  const Support support = gen_support(sparsity, sup_rng);
  return gen_signals(support, sparsity.n, m, sig_rng);
}

struct ChunkResult {
  GradientSet grads;
  double loss = 0.0;
  int count = 0;
};

}  // namespace

TrainResult train(const NetworkParams& initial, const SparsityConfig& sparsity,
                  const NoiseModel& noise, const TrainingConfig& cfg) {
  cfg.validate();
  initial.validate();
  if (sparsity.n != initial.arch.n) throw ConfigError("train: scenario n != arch n");

  TrainResult result;
  result.params = initial;
  if (cfg.epochs == 0) return result;

  const int m = initial.arch.m;
  const int l = initial.arch.l;
  const RngStream base(cfg.seed, 0);
  AdamState adam = AdamState::init(result.params);

  // Held-out eval samples, regenerated per use from their own streams.
  const auto t0 = Clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(cfg.sample_count);
    for (int i = 0; i < cfg.sample_count; ++i) order[i] = i;
    RngStream shuffle_rng = base.derive(kTagShuffle, static_cast<std::uint64_t>(epoch));
    for (int i = cfg.sample_count - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform() * (i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }

    double loss_sum = 0.0;
    long seen = 0;
    for (int start = 0; start < cfg.sample_count; start += cfg.batch_size) {
      const int bsize = std::min(cfg.batch_size, cfg.sample_count - start);
      const int nthreads = std::min(cfg.threads, bsize);
      const int chunk = (bsize + nthreads - 1) / nthreads;

      std::vector<ChunkResult> results(nthreads);
      auto worker = [&](int t) {
        const int lo = t * chunk;
        const int hi = std::min(lo + chunk, bsize);
        if (lo >= hi) return;
        const int count = hi - lo;
        ComplexMatrix x_in = ComplexMatrix::zero(sparsity.n, count * m);
        ComplexMatrix z = ComplexMatrix::zero(l, count * m);
        for (int s = lo; s < hi; ++s) {
          const std::uint64_t id = order[start + s];
          ComplexMatrix x =
              draw_sample(sparsity, m, base, kTagSupport, kTagSignal, id);
          x_in.re.middleCols((s - lo) * m, m) = x.re;
          x_in.im.middleCols((s - lo) * m, m) = x.im;
          RngStream noise_rng = base.derive(
              kTagNoise, static_cast<std::uint64_t>(epoch) * cfg.sample_count + id);
          ComplexMatrix zs = gen_noise(l, m, noise.sigma2, noise_rng);
          z.re.middleCols((s - lo) * m, m) = zs.re;
          z.im.middleCols((s - lo) * m, m) = zs.im;
        }
        const ForwardTrace trace =
            autoencoder_forward_traced(result.params, x_in, z);
        results[t].grads = backward(result.params, x_in, trace);
        results[t].loss = mse_loss(x_in, trace.x_hat, count);
        results[t].count = count;
      };
      if (nthreads == 1) {
        worker(0);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
      }

      GradientSet batch_grads = GradientSet::zeros_like(result.params);
      double batch_loss = 0.0;
      for (const auto& r : results) {
        if (r.count == 0) continue;
        const double weight = static_cast<double>(r.count) / bsize;
        batch_grads.accumulate(r.grads, weight);
        batch_loss += weight * r.loss;
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss * bsize;
      seen += bsize;
      adam_step(result.params, batch_grads, cfg, adam);
    }

    double eval_mse = 0.0;
    if (cfg.eval_samples > 0) {
      double acc = 0.0;
      for (int i = 0; i < cfg.eval_samples; ++i) {
        ComplexMatrix x =
            draw_sample(sparsity, m, base, kTagEvalSupport, kTagEvalSignal,
                        static_cast<std::uint64_t>(i));
        RngStream noise_rng = base.derive(
            kTagEvalNoise, static_cast<std::uint64_t>(epoch) * cfg.eval_samples + i);
        const ComplexMatrix z = gen_noise(l, m, noise.sigma2, noise_rng);
        const ForwardTrace trace = autoencoder_forward_traced(result.params, x, z);
        acc += (x - trace.x_hat).squared_frobenius() / sparsity.n;
      }
      eval_mse = acc / cfg.eval_samples;
    }
    result.curve.push_back({epoch, loss_sum / seen, eval_mse,
                            std::chrono::duration<double>(Clock::now() - t0).count()});
  }
  return result;
}

std::string curve_to_csv(const std::vector<LossCurvePoint>& curve) {
  std::ostringstream os;
  os << "epoch,train_loss,eval_mse,wall_time_s\n";
  os.precision(17);
  for (const auto& pt : curve) {
    os << pt.epoch << ',' << pt.train_loss << ',' << pt.eval_mse << ','
       << pt.wall_time_s << '\n';
  }
  return os.str();
}

ComplexMatrix extract_measurement_matrix(const NetworkParams& params) {
  return params.a;
}

}  // namespace jsr
