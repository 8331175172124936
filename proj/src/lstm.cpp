#include "abmcal/nn/lstm.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/random/uniform_real_distribution.hpp>

#include "abmcal/rng.hpp"

namespace abmcal::nn {

void NetworkConfig::validate() const {
  if (input_size < 1 || hidden_size < 1 || num_layers < 1 || dense_units < 1 ||
      static_features < 0 || outputs != 3) {
    throw std::invalid_argument("invalid network configuration");
  }
}

NetworkWeights::NetworkWeights(const NetworkConfig& config) : config_(config) {
  config.validate();
  const int h = config.hidden_size;
  for (int layer = 0; layer < config.num_layers; ++layer) {
    const int in = layer == 0 ? config.input_size : 2 * h;
    for (int dir = 0; dir < 2; ++dir) {
      lstm_.push_back({Matrix::Zero(4 * h, in), Matrix::Zero(4 * h, h),
                       Matrix::Zero(4 * h, 1)});
    }
  }
  dense_weights = Matrix::Zero(config.dense_units, 2 * h + config.static_features);
  dense_bias = Matrix::Zero(config.dense_units, 1);
  output_weights = Matrix::Zero(config.outputs, config.dense_units);
  output_bias = Matrix::Zero(config.outputs, 1);
}

NetworkWeights NetworkWeights::initialized(const NetworkConfig& config,
                                           std::uint64_t seed) {
  NetworkWeights w(config);
  Engine eng = make_engine(seed);
  auto fill = [&eng](Matrix& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    boost::random::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(eng);
    }
  };
  const int h = config.hidden_size;
  for (int layer = 0; layer < config.num_layers; ++layer) {
    for (auto dir : {Direction::kForward, Direction::kBackward}) {
      auto& l = w.lstm(layer, dir);
      fill(l.input_weights, static_cast<int>(l.input_weights.cols()));
      fill(l.recurrent_weights, h);
      fill(l.bias, h);
      l.bias.middleRows(h, h).setOnes();
    }
  }
  const int feat = 2 * h + config.static_features;
  fill(w.dense_weights, feat);
  fill(w.dense_bias, feat);
  fill(w.output_weights, config.dense_units);
  fill(w.output_bias, config.dense_units);
  return w;
}

std::vector<std::pair<std::string, Matrix*>> NetworkWeights::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (int layer = 0; layer < config_.num_layers; ++layer) {
    for (auto dir : {Direction::kForward, Direction::kBackward}) {
      const std::string prefix = "lstm." + std::to_string(layer) +
                                 (dir == Direction::kForward ? ".fwd." : ".bwd.");
      auto& l = lstm(layer, dir);
      out.emplace_back(prefix + "input_weights", &l.input_weights);
      out.emplace_back(prefix + "recurrent_weights", &l.recurrent_weights);
      out.emplace_back(prefix + "bias", &l.bias);
    }
  }
  out.emplace_back("dense.weights", &dense_weights);
  out.emplace_back("dense.bias", &dense_bias);
  out.emplace_back("output.weights", &output_weights);
  out.emplace_back("output.bias", &output_bias);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> NetworkWeights::tensors() const {
  auto mutable_list = const_cast<NetworkWeights*>(this)->tensors();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, ptr] : mutable_list) out.emplace_back(std::move(name), ptr);
  return out;
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, m] : tensors()) total += static_cast<std::size_t>(m->size());
  return total;
}

void NetworkWeights::set_zero() {
  for (auto& [name, m] : tensors()) m->setZero();
}

bool operator==(const NetworkWeights& a, const NetworkWeights& b) {
  if (!(a.config_ == b.config_)) return false;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) {
    const Matrix& x = *ta[k].second;
    const Matrix& y = *tb[k].second;
    if (x.rows() != y.rows() || x.cols() != y.cols() || x != y) return false;
  }
  return true;
}

std::size_t parameter_count(const NetworkConfig& c) {
  const std::size_t h = static_cast<std::size_t>(c.hidden_size);
  std::size_t total = 0;
  for (int layer = 0; layer < c.num_layers; ++layer) {
    const std::size_t in = layer == 0 ? static_cast<std::size_t>(c.input_size) : 2 * h;
    total += 2 * (4 * h * in + 4 * h * h + 4 * h);
  }
  const std::size_t d = static_cast<std::size_t>(c.dense_units);
  const std::size_t feat = 2 * h + static_cast<std::size_t>(c.static_features);
  total += d * feat + d + static_cast<std::size_t>(c.outputs) * (d + 1);
  return total;
}

CellState lstm_cell_step(const Vector& x, const Vector& h_prev, const Vector& c_prev,
                         const LstmLayerWeights& w) {
  const Eigen::Index h = w.recurrent_weights.cols();
  if (w.recurrent_weights.rows() != 4 * h || w.input_weights.rows() != 4 * h ||
      w.bias.rows() != 4 * h || w.bias.cols() != 1 ||
      w.input_weights.cols() != x.size() || h_prev.size() != h || c_prev.size() != h) {
    throw std::invalid_argument("lstm_cell_step: shape mismatch");
  }
  const Vector z = w.input_weights * x + w.recurrent_weights * h_prev + w.bias.col(0);
  CellState out{Vector(h), Vector(h)};
  for (Eigen::Index k = 0; k < h; ++k) {
    const double i = sigmoid(z(k));
    const double f = sigmoid(z(h + k));
    const double g = std::tanh(z(2 * h + k));
    const double o = sigmoid(z(3 * h + k));
    out.c(k) = f * c_prev(k) + i * g;
    out.h(k) = o * std::tanh(out.c(k));
  }
  return out;
}

}  // namespace abmcal::nn
