#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abmcal/abm.hpp"
#include "abmcal/rng.hpp"

namespace abmcal {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Uniform priors for the training and test scenarios.
struct PriorConfig {
  Range n{5000.0, 10000.0};
  Range p_recov{0.071, 0.25};
  Range i0{100.0, 2000.0};
  Range r0{1.0, 5.0};
  Range c_rate{5.0, 15.0};

  void validate() const;
};

struct Scenario {
  EpiParams params;
  EpiCurve curve;
  std::uint64_t seed = 0;  // simulation seed of `curve`
};

/// Draws N, p_recov, i0, R0, c_rate (in that order) and sets
/// p_tran = R0 * p_recov / c_rate.
EpiParams sample_params(const PriorConfig& prior, Engine& eng);

/// `count` scenarios; scenario i draws from child_seed(seed, i). The result
/// is ordered by index and does not depend on `jobs`.
std::vector<Scenario> generate_dataset(int count, int horizon,
                                       const PriorConfig& prior,
                                       std::uint64_t seed, int jobs = 1);

/// Dataset CSV: `scenario,seed,n,i0,c_rate,p_tran,p_recov,r0,day0..dayH-1`.
std::string dataset_to_csv(std::span<const Scenario> scenarios);
std::vector<Scenario> dataset_from_csv(const std::string& text);
void write_dataset(const std::string& path, std::span<const Scenario> scenarios);
std::vector<Scenario> read_dataset(const std::string& path);

/// Splits off the last `validation_fraction` of a seeded permutation.
struct Split {
  std::vector<Scenario> train;
  std::vector<Scenario> validation;
};
Split split_dataset(std::span<const Scenario> all, double validation_fraction,
                    std::uint64_t seed);

}  // namespace abmcal
