#pragma once

#include "abmcal/nn/weights.hpp"

namespace abmcal::nn {

struct AdamConfig {
  double learning_rate = 2.77e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  NetworkWeights first_moment;
  NetworkWeights second_moment;

  AdamState() = default;
  AdamState(const NetworkWeights& like, AdamConfig cfg);
};

/// Bias-corrected Adam update of one tensor; `step` is the 1-based count
/// after this update.
void adam_update(Matrix& weights, const Matrix& grad, Matrix& m, Matrix& v,
                 const AdamConfig& config, long step);

/// Applies one Adam step to every tensor and increments state.step.
void adam_step(NetworkWeights& weights, const NetworkWeights& grads, AdamState& state);

}  // namespace abmcal::nn
