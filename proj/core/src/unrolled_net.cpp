#include "jsr/unrolled_net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace jsr {

std::vector<std::pair<int, int>> NetArch::correction_dims() const {
  std::vector<std::pair<int, int>> dims;
  if (correction_layers == 0) return dims;
  const int h = hidden_width();
  int in = 2 * m;
  for (int j = 0; j < correction_layers - 1; ++j) {
    dims.emplace_back(h, in);
    in = h;
  }
  dims.emplace_back(m, in);  // last layer has m neurons, no activation
  return dims;
}

void NetArch::validate() const {
  if (n < 1 || l < 1 || m < 1) throw ConfigError("NetArch: n, l, m must be >= 1");
  if (unrolled_layers < 0) throw ConfigError("NetArch: unrolled layer count must be >= 0");
  if (correction_layers < 0) throw ConfigError("NetArch: correction layer count must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("NetArch: lambda must be >= 0");
  schedule.validate();
}

void NetworkParams::validate() const {
  arch.validate();
  if (a.rows() != arch.l || a.cols() != arch.n) {
    throw ShapeError("NetworkParams: encoder matrix is not L x N");
  }
  const auto dims = arch.correction_dims();
  for (const auto* branch : {&correction_re, &correction_im}) {
    if (branch->size() != dims.size()) {
      throw ShapeError("NetworkParams: correction layer count mismatch");
    }
    for (std::size_t j = 0; j < dims.size(); ++j) {
      const auto& layer = (*branch)[j];
      if (layer.weight.rows() != dims[j].first || layer.weight.cols() != dims[j].second ||
          layer.bias.size() != dims[j].first) {
        throw ShapeError("NetworkParams: correction layer " + std::to_string(j) +
                         " has wrong dimensions");
      }
    }
  }
}

NetworkParams init_params(const NetArch& arch, RngStream& rng) {
  arch.validate();
  NetworkParams params;
  params.arch = arch;
  params.a = gen_measurement_matrix(arch.l, arch.n, rng, /*normalize=*/true);
  for (auto* branch : {&params.correction_re, &params.correction_im}) {
    for (const auto& [out, in] : arch.correction_dims()) {
      DenseLayer layer;
      layer.weight.resize(out, in);
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) {
          layer.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
        }
      }
      layer.bias = Vector::Zero(out);
      branch->push_back(std::move(layer));
    }
  }
  return params;
}

ComplexMatrix encoder_forward(const NetworkParams& params, const ComplexMatrix& x,
                              const NoiseModel& noise, RngStream& rng) {
  if (x.rows() != params.arch.n) throw ShapeError("encoder_forward: X is not N x M");
  return measure(params.a, x, noise, rng);
}

LayerState pcd_layer_forward(const NetworkParams& params, const LayerState& state,
                             const ComplexMatrix& y, int k, PcdIterationTrace* trace) {
  if (k < 1) throw ConfigError("pcd_layer_forward: layer index must be >= 1");
  const Vector c = col_squared_norms(params.a);
  LayerState next = pcd_iterate(params.a, c, params.arch.lambda,
                                params.arch.schedule.at(k), params.arch.m,
                                state, y, trace);
  if (!next.all_finite()) {
    throw NumericError("pcd_layer_forward: non-finite state at layer " + std::to_string(k));
  }
  return next;
}

LayerState approximation_forward(const NetworkParams& params, const ComplexMatrix& y) {
  LayerState state = ComplexMatrix::zero(params.arch.n, y.cols());
  for (int k = 1; k <= params.arch.unrolled_layers; ++k) {
    state = pcd_layer_forward(params, state, y, k);
  }
  return state;
}

namespace {

// Rows of the correction input: one 2m-vector [x_re row | x_im row] per
// (row, sample) pair, sample-major blocks of n rows each.
Matrix correction_input(const LayerState& state, int m) {
  const auto n = state.rows();
  const auto batch = state.cols() / m;
  Matrix v(n * batch, 2 * m);
  for (Eigen::Index b = 0; b < batch; ++b) {
    v.block(b * n, 0, n, m) = state.re.middleCols(b * m, m);
    v.block(b * n, m, n, m) = state.im.middleCols(b * m, m);
  }
  return v;
}

Matrix branch_forward(const std::vector<DenseLayer>& layers, const Matrix& input) {
  Matrix h = input;
  for (std::size_t j = 0; j < layers.size(); ++j) {
    Matrix z = (h * layers[j].weight.transpose()).rowwise() + layers[j].bias.transpose();
    h = (j + 1 < layers.size()) ? z.cwiseMax(0.0) : std::move(z);
  }
  return h;
}

}  // namespace

ComplexMatrix correction_forward(const NetworkParams& params, const LayerState& state) {
  const int m = params.arch.m;
  if (state.cols() % m != 0) {
    throw ShapeError("correction_forward: state columns not a multiple of M");
  }
  if (params.arch.correction_layers == 0) return state;
  params.validate();

  const auto n = state.rows();
  const auto batch = state.cols() / m;
  const Matrix v = correction_input(state, m);
  const Matrix out_re = branch_forward(params.correction_re, v);
  const Matrix out_im = branch_forward(params.correction_im, v);

  ComplexMatrix x_hat = ComplexMatrix::zero(n, state.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    x_hat.re.middleCols(b * m, m) = out_re.block(b * n, 0, n, m);
    x_hat.im.middleCols(b * m, m) = out_im.block(b * n, 0, n, m);
  }
  return x_hat;
}

ComplexMatrix autoencoder_forward(const NetworkParams& params, const ComplexMatrix& x,
                                  const NoiseModel& noise, RngStream& rng) {
  const ComplexMatrix y = encoder_forward(params, x, noise, rng);
  return correction_forward(params, approximation_forward(params, y));
}

namespace {

nlohmann::json real_matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix real_matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ConfigError("params json: matrix data length mismatch");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++];
  }
  return m;
}

nlohmann::json complex_matrix_to_json(const ComplexMatrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(2 * m.re.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      data.push_back(m.re(i, j));
      data.push_back(m.im(i, j));
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

ComplexMatrix complex_matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != 2 * rows * cols) {
    throw ConfigError("params json: complex matrix data length mismatch");
  }
  ComplexMatrix m = ComplexMatrix::zero(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      m.re(i, j2) = data[k++];
      m.im(i, j2) = data[k++];
    }
  }
  return m;
}

nlohmann::json branch_to_json(const std::vector<DenseLayer>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& layer : layers) {
    arr.push_back({{"weight", real_matrix_to_json(layer.weight)},
                   {"bias", std::vector<double>(layer.bias.data(),
                                                layer.bias.data() + layer.bias.size())}});
  }
  return arr;
}

std::vector<DenseLayer> branch_from_json(const nlohmann::json& arr) {
  std::vector<DenseLayer> layers;
  for (const auto& j : arr) {
    DenseLayer layer;
    layer.weight = real_matrix_from_json(j.at("weight"));
    const auto bias = j.at("bias").get<std::vector<double>>();
    layer.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace

std::string params_to_json(const NetworkParams& params) {
  nlohmann::json j;
  j["format"] = 1;
  j["arch"] = {{"N", params.arch.n},
               {"L", params.arch.l},
               {"M", params.arch.m},
               {"U", params.arch.unrolled_layers},
               {"V", params.arch.correction_layers},
               {"hidden", params.arch.hidden_width()},
               {"lambda", params.arch.lambda},
               {"schedule",
                {{"form", step_form_name(params.arch.schedule.form)},
                 {"gamma0", params.arch.schedule.gamma0},
                 {"delta", params.arch.schedule.delta}}}};
  j["a"] = complex_matrix_to_json(params.a);
  j["correction"] = {{"re", branch_to_json(params.correction_re)},
                     {"im", branch_to_json(params.correction_im)}};
  return j.dump(2);
}

NetworkParams params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params json: ") + e.what());
  }
  if (j.value("format", 0) != 1) throw ConfigError("params json: unsupported format");
  NetworkParams params;
  try {
    const auto& arch = j.at("arch");
    params.arch.n = arch.at("N").get<int>();
    params.arch.l = arch.at("L").get<int>();
    params.arch.m = arch.at("M").get<int>();
    params.arch.unrolled_layers = arch.at("U").get<int>();
    params.arch.correction_layers = arch.at("V").get<int>();
    params.arch.hidden = arch.at("hidden").get<int>();
    params.arch.lambda = arch.at("lambda").get<double>();
    const auto& sched = arch.at("schedule");
    params.arch.schedule.form = step_form_from_name(sched.at("form").get<std::string>());
    params.arch.schedule.gamma0 = sched.at("gamma0").get<double>();
    params.arch.schedule.delta = sched.at("delta").get<double>();
    params.a = complex_matrix_from_json(j.at("a"));
    params.correction_re = branch_from_json(j.at("correction").at("re"));
    params.correction_im = branch_from_json(j.at("correction").at("im"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params json: ") + e.what());
  }
  params.validate();
  return params;
}

void save_params(const NetworkParams& params, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << params_to_json(params) << '\n';
}

NetworkParams load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return params_from_json(ss.str());
}

}  // namespace jsr
