#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abmcal/abm.hpp"
#include "abmcal/rng.hpp"

namespace abmcal::abc {

/// Parameters explored by the chain.
struct AbcTheta {
  double c_rate = 10.0;
  double p_recov = 0.1605;
  double p_tran = 0.05;

  bool in_range() const;
};

/// How each proposal's simulation is seeded.
enum class SimulationSeeding {
  /// Every simulation in a chain reuses one seed (common random numbers), so
  /// the simulated series is a deterministic function of the proposal.
  kPerChain,
  /// Iteration k simulates with child_seed(chain seed, k).
  kPerIteration,
};

struct AbcConfig {
  int iterations = 2000;
  int burn_in = 1000;
  double proposal_sd = 0.1;
  double kernel_factor = 0.05;  // epsilon = factor * ||S_obs||_2
  int n = 0;                    // fixed population size
  int i0 = 0;                   // fixed seed cases
  AbcTheta initial{};
  std::uint64_t seed = 1;
  SimulationSeeding seeding = SimulationSeeding::kPerChain;
  int max_redraws = 100;  // p_recov proposals >= 1 are redrawn this often

  void validate() const;
};

struct AbcSample {
  AbcTheta theta;          // chain state after the accept/reject decision
  double kernel = 0.0;     // K of that state (may underflow to 0)
  double log_kernel = 0.0; // log K, used for the acceptance ratio
  bool accepted = false;
};

struct AbcTrace {
  std::vector<AbcSample> samples;
  double epsilon = 0.0;
  double initial_log_kernel = 0.0;

  double acceptance_rate() const;
};

/// c' = c e^Z1, p_recov' = p_recov e^Z2, p_tran' = logistic(logit(p_tran) + Z3)
/// with Z ~ N(0, sd^2). A p_recov' >= 1 is redrawn up to `max_redraws` times;
/// std::nullopt means the step must be rejected.
std::optional<AbcTheta> propose(const AbcTheta& theta, double sd, Engine& eng,
                                int max_redraws = 100);

/// -||s - obs||^2 / (2 eps^2). Throws on length mismatch or eps <= 0.
double log_kernel_weight(std::span<const int> simulated, std::span<const int> observed,
                         double epsilon);

/// exp(log_kernel_weight). May underflow to 0 for very distant series.
double kernel_weight(std::span<const int> simulated, std::span<const int> observed,
                     double epsilon);

/// epsilon = factor * ||observed||_2.
double kernel_scale(std::span<const int> observed, double factor);

/// Likelihood-free Metropolis chain. Each iteration proposes, simulates one
/// series with (n, i0) fixed from the config, and accepts with probability
/// min(1, K'/K) (evaluated in log space).
AbcTrace run_lfmcmc(const EpiCurve& observed, const AbcConfig& config);

struct AbcEstimate {
  double c_rate = 0.0;
  double p_recov = 0.0;
  double p_tran = 0.0;
  double r0 = 0.0;  // p_tran * c_rate / p_recov
};

/// Median of a sample; the mean of the two central values for even sizes.
double median(std::vector<double> values);

/// Coordinate-wise median over samples [burn_in, end).
AbcEstimate point_estimate(const AbcTrace& trace, const AbcConfig& config);

/// Trace CSV: `iter,c_rate,p_recov,p_tran,kernel,accepted`.
std::string trace_to_csv(const AbcTrace& trace);
AbcTrace trace_from_csv(const std::string& text);

}  // namespace abmcal::abc
