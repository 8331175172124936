#pragma once

#include <algorithm>
#include <cmath>

#include "abmcal/nn/weights.hpp"

namespace abmcal::nn {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// log(1 + e^z) without overflow.
inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

struct CellState {
  Vector h;
  Vector c;
};

/// One LSTM step:
///   i, f, o = sigmoid(W x + U h + b)   g = tanh(W x + U h + b)
///   c' = f * c + i * g                 h' = o * tanh(c')
/// Throws std::invalid_argument on shape mismatch.
CellState lstm_cell_step(const Vector& x, const Vector& h_prev, const Vector& c_prev,
                         const LstmLayerWeights& w);

}  // namespace abmcal::nn
