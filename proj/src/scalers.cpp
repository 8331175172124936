#include "abmcal/scalers.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

#include "abmcal/errors.hpp"

namespace abmcal {

MinMax fit_min_max(std::span<const double> values, const char* feature) {
  if (values.empty()) {
    throw std::invalid_argument(std::string("no values to fit scaler '") + feature + "'");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) {
    throw std::invalid_argument(std::string("feature '") + feature +
                                "' is constant over the training set");
  }
  return {*lo, *hi};
}

Scalers fit_scalers(std::span<const Scenario> train) {
  if (train.empty()) throw std::invalid_argument("cannot fit scalers on an empty set");
  std::vector<double> incidence;
  std::vector<double> n;
  std::vector<double> p_recov;
  for (const auto& s : train) {
    for (int v : s.curve.incidence) incidence.push_back(v);
    n.push_back(s.params.n);
    p_recov.push_back(s.params.p_recov);
  }
  return {fit_min_max(incidence, "incidence"), fit_min_max(n, "n"),
          fit_min_max(p_recov, "p_recov")};
}

ModelInput encode_input(const Observation& obs, const Scalers& scalers,
                        int horizon, bool allow_padding) {
  const int length = obs.curve.horizon();
  if (length > horizon) {
    throw std::invalid_argument("curve has " + std::to_string(length) +
                                " days, model horizon is " + std::to_string(horizon));
  }
  if (length < horizon && !allow_padding) {
    throw std::invalid_argument("curve has " + std::to_string(length) +
                                " days, expected " + std::to_string(horizon) +
                                " (enable padding to accept shorter curves)");
  }
  ModelInput in;
  in.sequence.assign(static_cast<std::size_t>(horizon), 0.0);
  in.mask.assign(static_cast<std::size_t>(horizon), 0);
  for (int t = 0; t < length; ++t) {
    const bool observed = obs.curve.mask.empty() || obs.curve.mask[t] != 0;
    if (!observed) continue;
    in.sequence[t] = scalers.incidence.apply(obs.curve.incidence[t]);
    in.mask[t] = 1;
  }
  in.n = scalers.n.apply(obs.n);
  in.p_recov = scalers.p_recov.apply(obs.p_recov);
  return in;
}

RawFeatures decode_input(const ModelInput& input, const Scalers& scalers) {
  RawFeatures out;
  for (std::size_t t = 0; t < input.sequence.size(); ++t) {
    if (input.mask[t] != 0) out.incidence.push_back(scalers.incidence.invert(input.sequence[t]));
  }
  out.n = scalers.n.invert(input.n);
  out.p_recov = scalers.p_recov.invert(input.p_recov);
  return out;
}

namespace {

nlohmann::json to_json(const MinMax& m) { return {{"min", m.min}, {"max", m.max}}; }

MinMax min_max_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_object()) {
    throw SchemaError(std::string("scalers: missing feature '") + key + "'");
  }
  const auto& f = j[key];
  if (!f.contains("min") || !f.contains("max") || !f["min"].is_number() ||
      !f["max"].is_number()) {
    throw SchemaError(std::string("scalers: feature '") + key + "' needs numeric min/max");
  }
  MinMax m{f["min"].get<double>(), f["max"].get<double>()};
  if (!(m.max > m.min)) throw SchemaError(std::string("scalers: degenerate range for ") + key);
  return m;
}

}  // namespace

std::string scalers_to_json(const Scalers& scalers) {
  nlohmann::json j;
  j["incidence"] = to_json(scalers.incidence);
  j["n"] = to_json(scalers.n);
  j["p_recov"] = to_json(scalers.p_recov);
  return j.dump(2) + "\n";
}

Scalers scalers_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("scalers: ") + e.what());
  }
  return {min_max_from(j, "incidence"), min_max_from(j, "n"), min_max_from(j, "p_recov")};
}

}  // namespace abmcal
