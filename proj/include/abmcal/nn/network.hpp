#pragma once

#include <array>
#include <vector>

#include "abmcal/nn/weights.hpp"
#include "abmcal/rng.hpp"

namespace abmcal::nn {

/// A mini-batch laid out for the network. Column t * size + b of `inputs`
/// holds step t of sample b.
struct Batch {
  int steps = 0;
  int size = 0;
  Matrix inputs;   // input_size x (steps * size)
  Matrix mask;     // steps x size, entries 0 or 1
  Matrix statics;  // static_features x size
};

struct DropoutSpec {
  double rate = 0.0;
  bool training = false;
  Engine* rng = nullptr;  // required when training with rate > 0
};

struct DirectionCache {
  Matrix gates;       // 4H x TB, post-activation (i, f, g, o)
  Matrix cells;       // H x TB, cell state after step t (mask applied)
  Matrix hidden;      // H x TB, hidden state after step t (mask applied)
  Matrix tanh_cells;  // H x TB, tanh of the unmasked new cell state
};

struct LayerCache {
  Matrix input;                          // layer input after dropout
  Matrix dropout_mask;                   // empty when no dropout was applied
  std::array<DirectionCache, 2> dirs;
};

/// Activations kept for backward().
struct ForwardCache {
  int steps = 0;
  int size = 0;
  Matrix mask;
  std::vector<LayerCache> layers;
  Matrix features;     // (2H + S) x B
  Matrix dense_pre;    // D x B
  Matrix dense_out;    // D x B
  Matrix logits;       // 3 x B
  Matrix theta;        // 3 x B: p_tran, c_rate, R0
};

/// Runs the stacked bidirectional LSTM and returns
/// [h_fwd_final; h_bwd_final; statics] per sample. Masked steps carry the
/// previous state unchanged, so the final states are those of the last
/// valid step in each direction. Dropout (inverted scaling) is applied to the
/// outputs of every LSTM layer except the last, only when training.
Matrix bilstm_forward(const Batch& batch, const NetworkWeights& weights,
                      const DropoutSpec& dropout, ForwardCache* cache = nullptr);

/// Dense(ReLU) then output layer; rows are sigmoid(z0), softplus(z1),
/// softplus(z2).
Matrix head_forward(const Matrix& features, const NetworkWeights& weights,
                    ForwardCache* cache = nullptr);

/// Both stages; returns the 3 x B prediction.
Matrix forward(const Batch& batch, const NetworkWeights& weights,
               const DropoutSpec& dropout, ForwardCache* cache = nullptr);

/// Gradient of a scalar loss with respect to every weight, given the
/// gradient `d_theta` (3 x B) of that loss with respect to the predictions
/// and the cache of the forward pass that produced them. Throws
/// NumericalError naming the first non-finite gradient tensor.
NetworkWeights backward(const ForwardCache& cache, const NetworkWeights& weights,
                        const Matrix& d_theta);

}  // namespace abmcal::nn
