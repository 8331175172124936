#include "abmcal/calibrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/random/uniform_int_distribution.hpp>

#include "abmcal/csv.hpp"
#include "abmcal/errors.hpp"
#include "json.hpp"

namespace abmcal {

using nn::Matrix;
using Clock = std::chrono::steady_clock;

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("loss lambda must be a non-negative number");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("loss target weights must be non-negative");
    }
  }
}

double loss(std::span<const Theta> predicted, std::span<const Theta> target,
            std::span<const double> p_recov, const LossConfig& config) {
  if (predicted.size() != target.size() || predicted.size() != p_recov.size() ||
      predicted.empty()) {
    throw std::invalid_argument("loss: inputs must be non-empty and equally long");
  }
  config.validate();
  double total = 0.0;
  for (std::size_t b = 0; b < predicted.size(); ++b) {
    const Theta& p = predicted[b];
    const Theta& t = target[b];
    const double e0 = p.p_tran - t.p_tran;
    const double e1 = p.c_rate - t.c_rate;
    const double e2 = p.r0 - t.r0;
    const double residual = p.r0 * p_recov[b] - p.p_tran * p.c_rate;
    total += config.weights[0] * e0 * e0 + config.weights[1] * e1 * e1 +
             config.weights[2] * e2 * e2 + config.lambda * residual * residual;
  }
  const double value = total / static_cast<double>(predicted.size());
  if (!std::isfinite(value)) throw std::invalid_argument("loss: non-finite input");
  return value;
}

LossValue loss_with_gradient(const Matrix& predicted, const Matrix& target,
                             const Eigen::RowVectorXd& p_recov, const LossConfig& config) {
  const Eigen::Index size = predicted.cols();
  if (predicted.rows() != 3 || target.rows() != 3 || target.cols() != size ||
      p_recov.size() != size || size == 0) {
    throw std::invalid_argument("loss_with_gradient: shape mismatch");
  }
  const double inv = 1.0 / static_cast<double>(size);
  LossValue out{0.0, Matrix(3, size)};
  const auto& w = config.weights;
  for (Eigen::Index b = 0; b < size; ++b) {
    const double pt = predicted(0, b);
    const double cr = predicted(1, b);
    const double r0 = predicted(2, b);
    const double e0 = pt - target(0, b);
    const double e1 = cr - target(1, b);
    const double e2 = r0 - target(2, b);
    const double gamma = p_recov(b);
    const double residual = r0 * gamma - pt * cr;
    out.value += w[0] * e0 * e0 + w[1] * e1 * e1 + w[2] * e2 * e2 +
                 config.lambda * residual * residual;
    out.d_prediction(0, b) = (2.0 * w[0] * e0 - 2.0 * config.lambda * residual * cr) * inv;
    out.d_prediction(1, b) = (2.0 * w[1] * e1 - 2.0 * config.lambda * residual * pt) * inv;
    out.d_prediction(2, b) = (2.0 * w[2] * e2 + 2.0 * config.lambda * residual * gamma) * inv;
  }
  out.value *= inv;
  return out;
}

nn::Batch make_input_batch(std::span<const ModelInput> inputs) {
  if (inputs.empty()) throw std::invalid_argument("empty batch");
  const int steps = static_cast<int>(inputs.front().sequence.size());
  const int size = static_cast<int>(inputs.size());
  nn::Batch batch;
  batch.steps = steps;
  batch.size = size;
  batch.inputs.resize(1, static_cast<Eigen::Index>(steps) * size);
  batch.mask.resize(steps, size);
  batch.statics.resize(2, size);
  for (int b = 0; b < size; ++b) {
    const auto& in = inputs[static_cast<std::size_t>(b)];
    if (static_cast<int>(in.sequence.size()) != steps || in.mask.size() != in.sequence.size()) {
      throw std::invalid_argument("batch inputs differ in length");
    }
    for (int t = 0; t < steps; ++t) {
      batch.inputs(0, static_cast<Eigen::Index>(t) * size + b) = in.sequence[t];
      batch.mask(t, b) = in.mask[t] != 0 ? 1.0 : 0.0;
    }
    batch.statics(0, b) = in.n;
    batch.statics(1, b) = in.p_recov;
  }
  return batch;
}

namespace {

struct EncodedSet {
  std::vector<ModelInput> inputs;
  std::vector<Theta> targets;
  std::vector<double> p_recov;
};

EncodedSet encode_set(std::span<const Scenario> data, const Scalers& scalers, int horizon) {
  EncodedSet out;
  out.inputs.reserve(data.size());
  for (const auto& s : data) {
    out.inputs.push_back(encode_input(observe(s), scalers, horizon, true));
    out.targets.push_back({s.params.p_tran, s.params.c_rate, s.params.r0});
    out.p_recov.push_back(s.params.p_recov);
  }
  return out;
}

LabeledBatch gather(const EncodedSet& set, std::span<const std::size_t> idx) {
  std::vector<ModelInput> inputs;
  inputs.reserve(idx.size());
  LabeledBatch lb;
  lb.targets.resize(3, static_cast<Eigen::Index>(idx.size()));
  lb.p_recov.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto i = idx[k];
    inputs.push_back(set.inputs[i]);
    const auto b = static_cast<Eigen::Index>(k);
    lb.targets(0, b) = set.targets[i].p_tran;
    lb.targets(1, b) = set.targets[i].c_rate;
    lb.targets(2, b) = set.targets[i].r0;
    lb.p_recov(b) = set.p_recov[i];
  }
  lb.batch = make_input_batch(inputs);
  return lb;
}

double mean_loss(const nn::NetworkWeights& weights, const EncodedSet& set,
                 const LossConfig& loss_config, int batch_size) {
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.inputs.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(set.inputs.size(), start + static_cast<std::size_t>(batch_size));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto lb = gather(set, idx);
    const Matrix pred = nn::forward(lb.batch, weights, {});
    total += loss_with_gradient(pred, lb.targets, lb.p_recov, loss_config).value *
             static_cast<double>(idx.size());
  }
  return total / static_cast<double>(set.inputs.size());
}

int horizon_of(std::span<const Scenario> data) {
  if (data.empty()) throw std::invalid_argument("empty data set");
  return data.front().curve.horizon();
}

}  // namespace

LabeledBatch make_batch(std::span<const Scenario> scenarios, const Scalers& scalers,
                        int horizon) {
  const auto set = encode_set(scenarios, scalers, horizon);
  std::vector<std::size_t> idx(set.inputs.size());
  std::iota(idx.begin(), idx.end(), 0);
  return gather(set, idx);
}

LossGradient loss_gradient(const LabeledBatch& batch, const nn::NetworkWeights& weights,
                           const LossConfig& loss_config, const nn::DropoutSpec& dropout) {
  nn::ForwardCache cache;
  const Matrix pred = nn::forward(batch.batch, weights, dropout, &cache);
  auto lv = loss_with_gradient(pred, batch.targets, batch.p_recov, loss_config);
  return {lv.value, nn::backward(cache, weights, lv.d_prediction)};
}

void TrainConfig::validate() const {
  network.validate();
  if (network.input_size != 1 || network.static_features != 2) {
    throw std::invalid_argument("calibration network needs 1 input and 2 static features");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("max epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in (0, 1)");
  }
}

double evaluate_loss(const nn::NetworkWeights& weights, std::span<const Scenario> data,
                     const Scalers& scalers, int horizon, const LossConfig& loss_config,
                     int batch_size) {
  return mean_loss(weights, encode_set(data, scalers, horizon), loss_config, batch_size);
}

TrainedModel train(std::span<const Scenario> train_set, std::span<const Scenario> val_set,
                   const Scalers& scalers, const TrainConfig& cfg,
                   const LossConfig& loss_config, EpochCallback on_epoch) {
  cfg.validate();
  loss_config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("training and validation sets must be non-empty");
  }
  const int horizon = horizon_of(train_set);

  TrainedModel model;
  model.weights = nn::NetworkWeights::initialized(cfg.network, child_seed(cfg.seed, 0));
  model.scalers = scalers;
  model.loss = loss_config;
  model.metadata.seed = cfg.seed;
  model.metadata.horizon = horizon;

  const auto train_data = encode_set(train_set, scalers, horizon);
  const auto val_data = encode_set(val_set, scalers, horizon);
  constexpr int kEvalBatch = 256;

  model.metadata.best_val_loss = mean_loss(model.weights, val_data, loss_config, kEvalBatch);
  if (cfg.max_epochs == 0) return model;

  nn::NetworkWeights weights = model.weights;
  nn::AdamState adam(weights, {cfg.learning_rate, 0.9, 0.999, 1e-8});
  Engine shuffle_eng = make_engine(child_seed(cfg.seed, 1));
  Engine dropout_eng = make_engine(child_seed(cfg.seed, 2));
  const nn::DropoutSpec dropout{cfg.dropout, true, &dropout_eng};

  std::vector<std::size_t> order(train_data.inputs.size());
  std::iota(order.begin(), order.end(), 0);
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = Clock::now();
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      boost::random::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(shuffle_eng)]);
    }
    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto lb = gather(train_data, std::span(order).subspan(start, end - start));
      LossGradient lg;
      try {
        lg = loss_gradient(lb, weights, loss_config, dropout);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " +
                             e.what());
      }
      if (!std::isfinite(lg.value)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch));
      }
      train_total += lg.value * static_cast<double>(end - start);
      nn::adam_step(weights, lg.gradient, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(order.size());
    rec.val_loss = mean_loss(weights, val_data, loss_config, kEvalBatch);
    rec.seconds = std::chrono::duration<double>(Clock::now() - started).count();
    model.metadata.history.push_back(rec);
    model.metadata.epochs_run = epoch;
    if (on_epoch != nullptr) on_epoch(rec);

    if (rec.val_loss < model.metadata.best_val_loss) {
      model.metadata.best_val_loss = rec.val_loss;
      model.metadata.best_epoch = epoch;
      model.weights = weights;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return model;
}

Prediction predict(const TrainedModel& model, const Observation& observed) {
  const auto started = Clock::now();
  const ModelInput input =
      encode_input(observed, model.scalers, model.metadata.horizon, true);
  const Matrix theta = nn::forward(make_input_batch(std::span(&input, 1)), model.weights, {});
  Prediction out;
  out.theta = {theta(0, 0), theta(1, 0), theta(2, 0)};
  out.seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return out;
}

std::vector<Theta> predict_many(const TrainedModel& model,
                                std::span<const Observation> observed) {
  std::vector<Theta> out;
  out.reserve(observed.size());
  constexpr std::size_t kChunk = 256;
  std::vector<ModelInput> inputs;
  for (std::size_t start = 0; start < observed.size(); start += kChunk) {
    const std::size_t end = std::min(observed.size(), start + kChunk);
    inputs.clear();
    for (std::size_t i = start; i < end; ++i) {
      inputs.push_back(encode_input(observed[i], model.scalers, model.metadata.horizon, true));
    }
    const Matrix theta = nn::forward(make_input_batch(inputs), model.weights, {});
    for (Eigen::Index b = 0; b < theta.cols(); ++b) {
      out.push_back({theta(0, b), theta(1, b), theta(2, b)});
    }
  }
  return out;
}

namespace {

using nlohmann::json;

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(std::string("model file: missing '") + key + "'");
  }
  return j.at(key);
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file: bad '") + key + "': " + e.what());
  }
}

json minmax_json(const MinMax& m) { return {{"min", m.min}, {"max", m.max}}; }

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  const auto& c = model.weights.config();
  json j;
  j["format_version"] = kModelFormatVersion;
  j["architecture"] = {{"input_size", c.input_size},     {"hidden_size", c.hidden_size},
                       {"num_layers", c.num_layers},     {"dense_units", c.dense_units},
                       {"static_features", c.static_features}, {"outputs", c.outputs}};
  json tensors = json::object();
  for (const auto& [name, m] : model.weights.tensors()) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m->size()));
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index col = 0; col < m->cols(); ++col) values.push_back((*m)(r, col));
    }
    tensors[name] = {{"shape", {m->rows(), m->cols()}}, {"values", std::move(values)}};
  }
  j["tensors"] = std::move(tensors);
  j["scalers"] = {{"incidence", minmax_json(model.scalers.incidence)},
                  {"n", minmax_json(model.scalers.n)},
                  {"p_recov", minmax_json(model.scalers.p_recov)}};
  j["loss"] = {{"lambda", model.loss.lambda}, {"weights", model.loss.weights}};
  const auto& md = model.metadata;
  json history = json::array();
  for (const auto& e : md.history) {
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_loss", e.val_loss},
                       {"seconds", e.seconds}});
  }
  j["metadata"] = {{"epochs_run", md.epochs_run}, {"best_epoch", md.best_epoch},
                   {"best_val_loss", md.best_val_loss}, {"seed", md.seed},
                   {"horizon", md.horizon},     {"history", std::move(history)}};
  return j.dump() + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file is not valid JSON: ") + e.what());
  }
  const int version = get<int>(j, "format_version");
  if (version != kModelFormatVersion) {
    throw SchemaError("model file format_version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto& arch = field(j, "architecture");
  nn::NetworkConfig cfg;
  cfg.input_size = get<int>(arch, "input_size");
  cfg.hidden_size = get<int>(arch, "hidden_size");
  cfg.num_layers = get<int>(arch, "num_layers");
  cfg.dense_units = get<int>(arch, "dense_units");
  cfg.static_features = get<int>(arch, "static_features");
  cfg.outputs = get<int>(arch, "outputs");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }

  TrainedModel model;
  model.weights = nn::NetworkWeights(cfg);
  const auto& tensors = field(j, "tensors");
  if (!tensors.is_object() || tensors.size() != model.weights.tensors().size()) {
    throw SchemaError("model file: tensor set does not match architecture");
  }
  for (auto& [name, m] : model.weights.tensors()) {
    const auto& t = field(tensors, name.c_str());
    const auto shape = get<std::vector<long long>>(t, "shape");
    if (shape.size() != 2 || shape[0] != m->rows() || shape[1] != m->cols()) {
      throw SchemaError("model file: tensor '" + name + "' has the wrong shape");
    }
    const auto values = get<std::vector<double>>(t, "values");
    if (static_cast<Eigen::Index>(values.size()) != m->size()) {
      throw SchemaError("model file: tensor '" + name + "' has the wrong value count");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index col = 0; col < m->cols(); ++col) (*m)(r, col) = values[k++];
    }
  }
  const auto& sc = field(j, "scalers");
  auto read_mm = [&](const char* key) {
    const auto& f = field(sc, key);
    return MinMax{get<double>(f, "min"), get<double>(f, "max")};
  };
  model.scalers = {read_mm("incidence"), read_mm("n"), read_mm("p_recov")};
  const auto& ls = field(j, "loss");
  model.loss.lambda = get<double>(ls, "lambda");
  model.loss.weights = get<std::array<double, 3>>(ls, "weights");
  const auto& md = field(j, "metadata");
  model.metadata.epochs_run = get<int>(md, "epochs_run");
  model.metadata.best_epoch = get<int>(md, "best_epoch");
  model.metadata.best_val_loss = get<double>(md, "best_val_loss");
  model.metadata.seed = get<std::uint64_t>(md, "seed");
  model.metadata.horizon = get<int>(md, "horizon");
  for (const auto& e : field(md, "history")) {
    model.metadata.history.push_back({get<int>(e, "epoch"), get<double>(e, "train_loss"),
                                      get<double>(e, "val_loss"), get<double>(e, "seconds")});
  }
  return model;
}

void save_model(const TrainedModel& model, const std::string& path) {
  csv::write_file(path, model_to_json(model));
}

TrainedModel load_model(const std::string& path) {
  return model_from_json(csv::read_file(path));
}

std::string training_log_csv(const TrainingMetadata& metadata) {
  std::string out = "epoch,train_loss,val_loss,seconds\n";
  for (const auto& e : metadata.history) {
    out += std::to_string(e.epoch) + ',' + csv::format_double(e.train_loss) + ',' +
           csv::format_double(e.val_loss) + ',' + csv::format_double(e.seconds) + '\n';
  }
  return out;
}

}  // namespace abmcal
