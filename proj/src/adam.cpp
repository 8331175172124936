#include "abmcal/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace abmcal::nn {

AdamState::AdamState(const NetworkWeights& like, AdamConfig cfg)
    : config(cfg), first_moment(like.config()), second_moment(like.config()) {}

void adam_update(Matrix& weights, const Matrix& grad, Matrix& m, Matrix& v,
                 const AdamConfig& config, long step) {
  if (grad.rows() != weights.rows() || grad.cols() != weights.cols() ||
      m.rows() != weights.rows() || v.rows() != weights.rows()) {
    throw std::invalid_argument("adam_update: shape mismatch");
  }
  m = config.beta1 * m + (1.0 - config.beta1) * grad;
  v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  weights.array() -= config.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + config.epsilon);
}

void adam_step(NetworkWeights& weights, const NetworkWeights& grads, AdamState& state) {
  if (!(weights.config() == grads.config()) ||
      !(weights.config() == state.first_moment.config())) {
    throw std::invalid_argument("adam_step: configuration mismatch");
  }
  ++state.step;
  auto w = weights.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (std::size_t k = 0; k < w.size(); ++k) {
    adam_update(*w[k].second, *g[k].second, *m[k].second, *v[k].second, state.config,
                state.step);
  }
}

}  // namespace abmcal::nn
