#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace abmcal::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Shape of the calibration network: stacked bidirectional LSTM layers, one
/// ReLU dense layer and a 3-unit output layer.
struct NetworkConfig {
  int input_size = 1;
  int hidden_size = 160;
  int num_layers = 3;
  int dense_units = 64;
  int static_features = 2;
  int outputs = 3;

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Trainable tensors of one LSTM direction. Gate rows are stacked in the
/// order input, forget, cell candidate, output (4 * hidden rows).
struct LstmLayerWeights {
  Matrix input_weights;      // 4H x input
  Matrix recurrent_weights;  // 4H x H
  Matrix bias;               // 4H x 1
};

enum class Direction { kForward = 0, kBackward = 1 };

/// All trainable tensors, addressable by stable names:
///   lstm.<layer>.<fwd|bwd>.{input_weights,recurrent_weights,bias},
///   dense.weights, dense.bias, output.weights, output.bias.
class NetworkWeights {
 public:
  NetworkWeights() = default;
  /// All-zero weights.
  explicit NetworkWeights(const NetworkConfig& config);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor (fan_in is the
  /// hidden size for recurrent weights and LSTM biases); forget-gate biases
  /// set to 1.
  static NetworkWeights initialized(const NetworkConfig& config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }

  LstmLayerWeights& lstm(int layer, Direction dir) {
    return lstm_[static_cast<std::size_t>(layer * 2 + static_cast<int>(dir))];
  }
  const LstmLayerWeights& lstm(int layer, Direction dir) const {
    return lstm_[static_cast<std::size_t>(layer * 2 + static_cast<int>(dir))];
  }

  Matrix dense_weights;   // D x (2H + S)
  Matrix dense_bias;      // D x 1
  Matrix output_weights;  // outputs x D
  Matrix output_bias;     // outputs x 1

  /// (name, tensor) pairs in stable order.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;

  std::size_t parameter_count() const;

  /// Every entry set to zero (shapes kept).
  void set_zero();

  friend bool operator==(const NetworkWeights& a, const NetworkWeights& b);

 private:
  NetworkConfig config_;
  std::vector<LstmLayerWeights> lstm_;
};

/// Number of scalar parameters for a configuration.
std::size_t parameter_count(const NetworkConfig& config);

}  // namespace abmcal::nn
