#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abmcal/nn/adam.hpp"
#include "abmcal/nn/network.hpp"
#include "abmcal/scalers.hpp"
#include "abmcal/scenario.hpp"

namespace abmcal {

/// Targets and predictions: transmission probability, contact rate, R0.
struct Theta {
  double p_tran = 0.0;
  double c_rate = 0.0;
  double r0 = 0.0;
};

/// Composite loss: weighted squared error plus lambda times the squared
/// consistency residual R0 * p_recov - p_tran * c_rate.
struct LossConfig {
  double lambda = 1.0;
  std::array<double, 3> weights{1.0, 1.0, 1.0};  // p_tran, c_rate, R0

  void validate() const;
};

/// Batch-mean loss. Throws std::invalid_argument on size mismatch or
/// non-finite input.
double loss(std::span<const Theta> predicted, std::span<const Theta> target,
            std::span<const double> p_recov, const LossConfig& config);

/// Loss value and its gradient w.r.t. the 3 x B prediction matrix.
struct LossValue {
  double value = 0.0;
  nn::Matrix d_prediction;
};
LossValue loss_with_gradient(const nn::Matrix& predicted, const nn::Matrix& target,
                             const Eigen::RowVectorXd& p_recov, const LossConfig& config);

/// Inputs plus supervision for one mini-batch.
struct LabeledBatch {
  nn::Batch batch;
  nn::Matrix targets;          // 3 x B
  Eigen::RowVectorXd p_recov;  // raw recovery probability per sample
};

LabeledBatch make_batch(std::span<const Scenario> scenarios, const Scalers& scalers,
                        int horizon);
nn::Batch make_input_batch(std::span<const ModelInput> inputs);

/// Loss and exact gradient of the loss for one batch (dropout off unless
/// `dropout` says otherwise).
struct LossGradient {
  double value = 0.0;
  nn::NetworkWeights gradient;
};
LossGradient loss_gradient(const LabeledBatch& batch, const nn::NetworkWeights& weights,
                           const LossConfig& loss_config,
                           const nn::DropoutSpec& dropout = {});

struct TrainConfig {
  nn::NetworkConfig network;
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 10;
  double learning_rate = 2.77e-4;
  double dropout = 0.5;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainingMetadata {
  int epochs_run = 0;
  int best_epoch = 0;  // 0 = initial weights
  double best_val_loss = 0.0;
  std::uint64_t seed = 0;
  int horizon = 0;
  std::vector<EpochRecord> history;
};

/// Weights plus everything needed to apply them.
struct TrainedModel {
  nn::NetworkWeights weights;
  Scalers scalers;
  LossConfig loss;
  TrainingMetadata metadata;
};

/// Progress callback invoked after every epoch.
using EpochCallback = void (*)(const EpochRecord&);

/// Mini-batch Adam with early stopping on validation loss. The returned
/// weights are those of the epoch with the lowest validation loss (initial
/// weights if no epoch improved on them). Throws NumericalError naming the
/// epoch if the training loss becomes non-finite.
TrainedModel train(std::span<const Scenario> train_set, std::span<const Scenario> val_set,
                   const Scalers& scalers, const TrainConfig& train_config,
                   const LossConfig& loss_config, EpochCallback on_epoch = nullptr);

/// Mean loss over a data set with dropout disabled.
double evaluate_loss(const nn::NetworkWeights& weights, std::span<const Scenario> data,
                     const Scalers& scalers, int horizon, const LossConfig& loss_config,
                     int batch_size = 256);

struct Prediction {
  Theta theta;
  double seconds = 0.0;  // scaling + forward pass
};

/// One deterministic forward pass (dropout off) using the model's scalers.
/// Curves shorter than the model horizon are right-padded and masked.
Prediction predict(const TrainedModel& model, const Observation& observed);

/// Batched inference over many observations.
std::vector<Theta> predict_many(const TrainedModel& model,
                                std::span<const Observation> observed);

inline constexpr int kModelFormatVersion = 1;

/// JSON document: format_version, architecture, tensors (name -> shape,
/// row-major values), scalers, loss and training metadata.
std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

/// Training log CSV: `epoch,train_loss,val_loss,seconds`.
std::string training_log_csv(const TrainingMetadata& metadata);

}  // namespace abmcal
