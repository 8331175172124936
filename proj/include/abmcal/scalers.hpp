#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abmcal/abm.hpp"
#include "abmcal/scenario.hpp"

namespace abmcal {

struct MinMax {
  double min = 0.0;
  double max = 0.0;

  double apply(double x) const { return (x - min) / (max - min); }
  double invert(double y) const { return min + y * (max - min); }

  friend bool operator==(const MinMax&, const MinMax&) = default;
};

/// Throws std::invalid_argument for an empty or constant sample.
MinMax fit_min_max(std::span<const double> values, const char* feature);

/// Input scalers. `incidence` is one global pair over every day of every
/// training curve.
struct Scalers {
  MinMax incidence;
  MinMax n;
  MinMax p_recov;

  friend bool operator==(const Scalers&, const Scalers&) = default;
};

Scalers fit_scalers(std::span<const Scenario> train);

/// What the calibrator observes for one epidemic.
struct Observation {
  EpiCurve curve;
  int n = 0;
  double p_recov = 0.0;
};

inline Observation observe(const Scenario& s) {
  return {s.curve, s.params.n, s.params.p_recov};
}

/// Scaled model input. No clipping: test data may leave [0, 1].
struct ModelInput {
  std::vector<double> sequence;
  std::vector<std::uint8_t> mask;
  double n = 0.0;
  double p_recov = 0.0;
};

/// Scales an observation to `horizon` steps. Shorter curves are right-padded
/// with zeros and mask 0 when `allow_padding` is set; otherwise a length
/// mismatch throws std::invalid_argument. Longer curves always throw.
ModelInput encode_input(const Observation& obs, const Scalers& scalers,
                        int horizon, bool allow_padding = false);

/// Unscaled features recovered from a ModelInput.
struct RawFeatures {
  std::vector<double> incidence;  // observed days only
  double n = 0.0;
  double p_recov = 0.0;
};

/// Inverse of encode_input on the observed days.
RawFeatures decode_input(const ModelInput& input, const Scalers& scalers);

std::string scalers_to_json(const Scalers& scalers);
Scalers scalers_from_json(const std::string& text);

}  // namespace abmcal
