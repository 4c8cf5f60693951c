#pragma once

#include <string>
#include <vector>

#include "jsr/complex_matrix.hpp"
#include "jsr/rng.hpp"
#include "jsr/signal_model.hpp"
#include "jsr/solvers.hpp"

namespace jsr {

// Iterate of the unrolled recursion; may stack several samples side by side
// in blocks of M columns.
using LayerState = ComplexMatrix;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct NetArch {
  int n = 0, l = 0, m = 0;
  int unrolled_layers = 20;    // U; 0 skips the approximation part
  int correction_layers = 3;   // V; 0 bypasses the correction part
  int hidden = 0;              // width of the V-1 hidden layers; 0 means 4*m
  double lambda = 0.1;
  StepSchedule schedule{};

  int hidden_width() const { return hidden > 0 ? hidden : 4 * m; }
  // Width chain of one correction branch: 2m -> hidden x (V-1) -> m.
  std::vector<std::pair<int, int>> correction_dims() const;
  void validate() const;
};

// Trainable state: the encoder matrix (its re/im parts are the weights of the
// two linear input networks) and the correction layers, duplicated for the
// real and imaginary output branches.
struct NetworkParams {
  NetArch arch;
  ComplexMatrix a;  // L x N
  std::vector<DenseLayer> correction_re, correction_im;

  void validate() const;
};

// Encoder weights: i.i.d. CN(0,1) entries with each column projected to joint
// norm sqrt(L). Correction layers: zero biases, uniform +-sqrt(6/(fan_in+fan_out)).
NetworkParams init_params(const NetArch& arch, RngStream& rng);

// Noisy linear compression Y = A X + Z with fresh noise, re/im parts each
// N(0, sigma2/2).
ComplexMatrix encoder_forward(const NetworkParams& params, const ComplexMatrix& x,
                              const NoiseModel& noise, RngStream& rng);

// One parallel coordinate-descent iteration, k >= 1. Arithmetic is shared
// with pcd_mmv via pcd_iterate, so layer k equals the solver's iterate k.
LayerState pcd_layer_forward(const NetworkParams& params, const LayerState& state,
                             const ComplexMatrix& y, int k,
                             PcdIterationTrace* trace = nullptr);

// Composes U layers from the zero state.
LayerState approximation_forward(const NetworkParams& params, const ComplexMatrix& y);

// Row-wise correction: each row feeds its [re | im] entries through V-1 ReLU
// layers and a final linear layer per branch; weights are shared across rows.
// V = 0 returns the state unchanged.
ComplexMatrix correction_forward(const NetworkParams& params, const LayerState& state);

// encoder -> approximation -> correction.
ComplexMatrix autoencoder_forward(const NetworkParams& params, const ComplexMatrix& x,
                                  const NoiseModel& noise, RngStream& rng);

// Single JSON document, "format": 1; matrices embedded as {rows, cols, data}
// with the complex encoder interleaved re im as in the textual matrix format.
std::string params_to_json(const NetworkParams& params);
NetworkParams params_from_json(const std::string& text);
void save_params(const NetworkParams& params, const std::string& path);
NetworkParams load_params(const std::string& path);

}  // namespace jsr
