#include "abmcal/nn/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "abmcal/errors.hpp"
#include "abmcal/nn/lstm.hpp"

namespace abmcal::nn {

namespace {

template <typename Derived>
auto sigmoid_of(const Eigen::MatrixBase<Derived>& z) {
  return (1.0 + (-z.array()).exp()).inverse();
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError("non-finite values in " + what);
}

void run_direction(const Matrix& input, const Matrix& mask, const LstmLayerWeights& w,
                   int steps, int batch, bool reverse, DirectionCache& out) {
  const Eigen::Index h = w.recurrent_weights.cols();
  const Eigen::Index total = static_cast<Eigen::Index>(steps) * batch;
  Matrix zx = w.input_weights * input;
  zx.colwise() += w.bias.col(0);

  out.gates.resize(4 * h, total);
  out.cells.resize(h, total);
  out.hidden.resize(h, total);
  out.tanh_cells.resize(h, total);

  Matrix hs = Matrix::Zero(h, batch);
  Matrix cs = Matrix::Zero(h, batch);
  Matrix z(4 * h, batch);
  Matrix c_new(h, batch);
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    z.noalias() = w.recurrent_weights * hs;
    z += zx.middleCols(col, batch);

    auto gates = out.gates.middleCols(col, batch);
    gates.topRows(h) = sigmoid_of(z.topRows(h)).matrix();
    gates.middleRows(h, h) = sigmoid_of(z.middleRows(h, h)).matrix();
    gates.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    gates.bottomRows(h) = sigmoid_of(z.bottomRows(h)).matrix();

    c_new = (gates.middleRows(h, h).array() * cs.array() +
             gates.topRows(h).array() * gates.middleRows(2 * h, h).array())
                .matrix();
    auto tc = out.tanh_cells.middleCols(col, batch);
    tc = c_new.array().tanh().matrix();
    for (int b = 0; b < batch; ++b) {
      if (mask(t, b) == 0.0) continue;
      cs.col(b) = c_new.col(b);
      hs.col(b) = (gates.bottomRows(h).col(b).array() * tc.col(b).array()).matrix();
    }
    out.cells.middleCols(col, batch) = cs;
    out.hidden.middleCols(col, batch) = hs;
  }
}

// Backpropagation through time for one direction. `d_hidden` holds the
// gradient of the loss w.r.t. the hidden output at each step from outside the
// recurrence; gradients w.r.t. the weights go to `grad`, and w.r.t. the layer
// input are added to `d_input`.
void backprop_direction(const Matrix& input, const Matrix& mask,
                        const LstmLayerWeights& w, const DirectionCache& cache,
                        const Matrix& d_hidden, int steps, int batch, bool reverse,
                        LstmLayerWeights& grad, Matrix& d_input) {
  const Eigen::Index h = w.recurrent_weights.cols();
  const Eigen::Index total = static_cast<Eigen::Index>(steps) * batch;
  Matrix dz_all(4 * h, total);
  Matrix h_prev_all = Matrix::Zero(h, total);

  Matrix dh = Matrix::Zero(h, batch);
  Matrix dc = Matrix::Zero(h, batch);
  Matrix dc_new(h, batch);
  Matrix dh_rec(h, batch);
  const Matrix zero_state = Matrix::Zero(h, batch);

  for (int s = steps - 1; s >= 0; --s) {
    const int t = reverse ? steps - 1 - s : s;
    const int t_prev = reverse ? t + 1 : t - 1;
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    const bool has_prev = s > 0;
    const auto c_prev = has_prev
                            ? cache.cells.middleCols(static_cast<Eigen::Index>(t_prev) * batch, batch)
                            : zero_state.middleCols(0, batch);
    if (has_prev) {
      h_prev_all.middleCols(col, batch) =
          cache.hidden.middleCols(static_cast<Eigen::Index>(t_prev) * batch, batch);
    }

    dh += d_hidden.middleCols(col, batch);

    const auto gates = cache.gates.middleCols(col, batch);
    const auto gi = gates.topRows(h).array();
    const auto gf = gates.middleRows(h, h).array();
    const auto gg = gates.middleRows(2 * h, h).array();
    const auto go = gates.bottomRows(h).array();
    const auto tc = cache.tanh_cells.middleCols(col, batch).array();

    dc_new = (dc.array() + dh.array() * go * (1.0 - tc.square())).matrix();
    auto dz = dz_all.middleCols(col, batch);
    dz.topRows(h) = (dc_new.array() * gg * gi * (1.0 - gi)).matrix();
    dz.middleRows(h, h) = (dc_new.array() * c_prev.array() * gf * (1.0 - gf)).matrix();
    dz.middleRows(2 * h, h) = (dc_new.array() * gi * (1.0 - gg.square())).matrix();
    dz.bottomRows(h) = (dh.array() * tc * go * (1.0 - go)).matrix();

    // Masked columns: the step was skipped, so the carried gradients pass
    // through unchanged and the step contributes nothing.
    for (int b = 0; b < batch; ++b) {
      if (mask(t, b) == 0.0) {
        dz.col(b).setZero();
        dc_new.col(b) = dc.col(b);
      } else {
        dc_new.col(b).array() *= gf.col(b);
      }
    }
    dh_rec.noalias() = w.recurrent_weights.transpose() * dz;
    for (int b = 0; b < batch; ++b) {
      if (mask(t, b) == 0.0) dh_rec.col(b) += dh.col(b);
    }
    dh.swap(dh_rec);
    dc.swap(dc_new);
  }

  grad.input_weights.noalias() += dz_all * input.transpose();
  grad.recurrent_weights.noalias() += dz_all * h_prev_all.transpose();
  grad.bias.col(0) += dz_all.rowwise().sum();
  d_input.noalias() += w.input_weights.transpose() * dz_all;
}

}  // namespace

Matrix bilstm_forward(const Batch& batch, const NetworkWeights& weights,
                      const DropoutSpec& dropout, ForwardCache* cache) {
  const auto& cfg = weights.config();
  const int steps = batch.steps;
  const int size = batch.size;
  const Eigen::Index total = static_cast<Eigen::Index>(steps) * size;
  const Eigen::Index h = cfg.hidden_size;
  if (steps < 1 || size < 1 || batch.inputs.rows() != cfg.input_size ||
      batch.inputs.cols() != total || batch.mask.rows() != steps ||
      batch.mask.cols() != size || batch.statics.rows() != cfg.static_features ||
      batch.statics.cols() != size) {
    throw std::invalid_argument("bilstm_forward: batch shape does not match network");
  }
  if (!(dropout.rate >= 0.0 && dropout.rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  const bool use_dropout = dropout.training && dropout.rate > 0.0;
  if (use_dropout && dropout.rng == nullptr) {
    throw std::invalid_argument("training dropout needs a random engine");
  }

  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c.steps = steps;
  c.size = size;
  c.mask = batch.mask;
  c.layers.assign(static_cast<std::size_t>(cfg.num_layers), LayerCache{});

  Matrix layer_input = batch.inputs;
  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    auto& lc = c.layers[static_cast<std::size_t>(layer)];
    if (layer > 0 && use_dropout) {
      const double keep_scale = 1.0 / (1.0 - dropout.rate);
      lc.dropout_mask.resize(layer_input.rows(), layer_input.cols());
      for (Eigen::Index j = 0; j < layer_input.cols(); ++j) {
        for (Eigen::Index i = 0; i < layer_input.rows(); ++i) {
          lc.dropout_mask(i, j) = uniform01(*dropout.rng) >= dropout.rate ? keep_scale : 0.0;
        }
      }
      layer_input.array() *= lc.dropout_mask.array();
    }
    lc.input = std::move(layer_input);
    run_direction(lc.input, batch.mask, weights.lstm(layer, Direction::kForward), steps,
                  size, false, lc.dirs[0]);
    run_direction(lc.input, batch.mask, weights.lstm(layer, Direction::kBackward), steps,
                  size, true, lc.dirs[1]);
    layer_input.resize(2 * h, total);
    layer_input.topRows(h) = lc.dirs[0].hidden;
    layer_input.bottomRows(h) = lc.dirs[1].hidden;
  }

  const auto& last = c.layers.back();
  Matrix features(2 * h + cfg.static_features, size);
  features.topRows(h) =
      last.dirs[0].hidden.middleCols(static_cast<Eigen::Index>(steps - 1) * size, size);
  features.middleRows(h, h) = last.dirs[1].hidden.middleCols(0, size);
  features.bottomRows(cfg.static_features) = batch.statics;
  require_finite(features, "lstm features");
  c.features = features;
  return features;
}

Matrix head_forward(const Matrix& features, const NetworkWeights& weights,
                    ForwardCache* cache) {
  if (features.rows() != weights.dense_weights.cols()) {
    throw std::invalid_argument("head_forward: feature size does not match network");
  }
  Matrix pre = weights.dense_weights * features;
  pre.colwise() += weights.dense_bias.col(0);
  Matrix act = pre.cwiseMax(0.0);
  Matrix logits = weights.output_weights * act;
  logits.colwise() += weights.output_bias.col(0);
  Matrix theta(3, logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    theta(0, b) = sigmoid(logits(0, b));
    theta(1, b) = softplus(logits(1, b));
    theta(2, b) = softplus(logits(2, b));
  }
  require_finite(theta, "output layer");
  if (cache != nullptr) {
    cache->features = features;
    cache->dense_pre = std::move(pre);
    cache->dense_out = std::move(act);
    cache->logits = std::move(logits);
    cache->theta = theta;
  }
  return theta;
}

Matrix forward(const Batch& batch, const NetworkWeights& weights,
               const DropoutSpec& dropout, ForwardCache* cache) {
  return head_forward(bilstm_forward(batch, weights, dropout, cache), weights, cache);
}

NetworkWeights backward(const ForwardCache& cache, const NetworkWeights& weights,
                        const Matrix& d_theta) {
  const auto& cfg = weights.config();
  const int steps = cache.steps;
  const int size = cache.size;
  const Eigen::Index h = cfg.hidden_size;
  const Eigen::Index total = static_cast<Eigen::Index>(steps) * size;
  if (d_theta.rows() != 3 || d_theta.cols() != size || cache.theta.cols() != size) {
    throw std::invalid_argument("backward: gradient shape does not match cached batch");
  }

  NetworkWeights grads(cfg);

  Matrix dz(3, size);
  for (Eigen::Index b = 0; b < size; ++b) {
    const double p = cache.theta(0, b);
    dz(0, b) = d_theta(0, b) * p * (1.0 - p);
    dz(1, b) = d_theta(1, b) * sigmoid(cache.logits(1, b));
    dz(2, b) = d_theta(2, b) * sigmoid(cache.logits(2, b));
  }
  grads.output_weights.noalias() = dz * cache.dense_out.transpose();
  grads.output_bias.col(0) = dz.rowwise().sum();
  Matrix d_pre = weights.output_weights.transpose() * dz;
  d_pre.array() *= (cache.dense_pre.array() > 0.0).cast<double>();
  grads.dense_weights.noalias() = d_pre * cache.features.transpose();
  grads.dense_bias.col(0) = d_pre.rowwise().sum();
  const Matrix d_features = weights.dense_weights.transpose() * d_pre;

  Matrix d_fwd = Matrix::Zero(h, total);
  Matrix d_bwd = Matrix::Zero(h, total);
  d_fwd.middleCols(static_cast<Eigen::Index>(steps - 1) * size, size) = d_features.topRows(h);
  d_bwd.middleCols(0, size) = d_features.middleRows(h, h);

  for (int layer = cfg.num_layers - 1; layer >= 0; --layer) {
    const auto& lc = cache.layers[static_cast<std::size_t>(layer)];
    Matrix d_input = Matrix::Zero(lc.input.rows(), total);
    backprop_direction(lc.input, cache.mask, weights.lstm(layer, Direction::kForward),
                       lc.dirs[0], d_fwd, steps, size, false,
                       grads.lstm(layer, Direction::kForward), d_input);
    backprop_direction(lc.input, cache.mask, weights.lstm(layer, Direction::kBackward),
                       lc.dirs[1], d_bwd, steps, size, true,
                       grads.lstm(layer, Direction::kBackward), d_input);
    if (layer == 0) break;
    if (lc.dropout_mask.size() != 0) d_input.array() *= lc.dropout_mask.array();
    d_fwd = d_input.topRows(h);
    d_bwd = d_input.bottomRows(h);
  }

  for (const auto& [name, m] : grads.tensors()) require_finite(*m, "gradient of " + name);
  return grads;
}

}  // namespace abmcal::nn
