#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jsr/unrolled_net.hpp"

namespace jsr {

struct TrainingConfig {
  int sample_count = 50000;  // I
  int batch_size = 64;
  int epochs = 10;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool project_columns = true;
  double fd_epsilon = 1e-6;  // step for finite-difference gradient checks
  std::uint64_t seed = 1;
  int threads = 1;
  int eval_samples = 200;  // held-out set for the per-epoch eval column

  void validate() const;
};

// Gradients of the loss with respect to every trainable parameter; shapes
// mirror NetworkParams (DenseLayer reused as a (d_weight, d_bias) pair).
struct GradientSet {
  Matrix d_a_re, d_a_im;
  std::vector<DenseLayer> d_correction_re, d_correction_im;

  static GradientSet zeros_like(const NetworkParams& params);
  void accumulate(const GradientSet& other, double weight);
};

// Cached intermediates of one forward pass over a stacked batch, as needed
// by backward(). The noise realization is kept so the same pass can be
// replayed for finite-difference checks.
struct ForwardTrace {
  int batch = 1;
  ComplexMatrix x_in;   // N x (M*batch)
  ComplexMatrix noise;  // L x (M*batch)
  ComplexMatrix y;
  std::vector<LayerState> states;         // X^(0) .. X^(U)
  std::vector<PcdIterationTrace> layers;  // residual, w, segment norms per layer
  Matrix v0;                              // correction input, rows = N*batch
  std::vector<Matrix> pre_re, pre_im;     // correction pre-activations per layer
  ComplexMatrix x_hat;

  // Distances to the two kinds of non-smooth points seen during the pass.
  double min_threshold_margin = 0.0;  // min | ||w|| - lambda |
  double min_relu_margin = 0.0;       // min |pre-activation| over hidden layers
};

// (1/(N*count)) * sum of squared complex entries of (x_true - x_hat);
// the stacked overload treats count side-by-side samples as the batch.
double mse_loss(const ComplexMatrix& x_true, const ComplexMatrix& x_hat, int count);
double mse_loss(const std::vector<ComplexMatrix>& x_true,
                const std::vector<ComplexMatrix>& x_hat);

// Forward pass with a fixed noise realization (pass a zero matrix for the
// noiseless case). x_in may stack several samples in blocks of M columns.
ForwardTrace autoencoder_forward_traced(const NetworkParams& params,
                                        const ComplexMatrix& x_in,
                                        const ComplexMatrix& noise);

// Exact reverse-mode gradients of mse_loss(x_true, x_hat, batch) with respect
// to every trainable parameter. Subgradient 0 is used at the shrinkage kink
// and at ReLU(0). The encoder matrix collects contributions from the encoder
// itself and from every unrolled layer.
GradientSet backward(const NetworkParams& params, const ComplexMatrix& x_true,
                     const ForwardTrace& trace);

struct AdamState {
  GradientSet first, second;
  int step = 0;

  static AdamState init(const NetworkParams& params);
};

// Standard bias-corrected update; afterwards, if cfg.project_columns, each
// encoder column is rescaled to joint (re, im) norm sqrt(L).
void adam_step(NetworkParams& params, const GradientSet& grads,
               const TrainingConfig& cfg, AdamState& state);

void project_encoder_columns(NetworkParams& params);

struct LossCurvePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double eval_mse = 0.0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<LossCurvePoint> curve;
};

// Mini-batch ADAM over sample_count scenario draws with fresh noise on every
// forward pass. Deterministic given cfg.seed and a fixed thread count;
// bit-exact across runs when threads == 1.
TrainResult train(const NetworkParams& initial, const SparsityConfig& sparsity,
                  const NoiseModel& noise, const TrainingConfig& cfg);

// Writes the curve as CSV: epoch,train_loss,eval_mse,wall_time_s.
std::string curve_to_csv(const std::vector<LossCurvePoint>& curve);

ComplexMatrix extract_measurement_matrix(const NetworkParams& params);

}  // namespace jsr
