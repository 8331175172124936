#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace abmcal {

/// One SIR scenario. `i0` is stored as a seed count, not a proportion.
struct EpiParams {
  int n = 0;            // population size
  int i0 = 0;           // initially infected agents
  double c_rate = 0.0;  // expected contacts per infectious agent per day
  double p_tran = 0.0;  // per-contact transmission probability
  double p_recov = 0.0; // per-day recovery probability
  double r0 = 0.0;      // basic reproduction number

  /// Throws std::invalid_argument if any field is out of range or non-finite.
  void validate() const;
};

/// Daily incidence series. incidence[0] holds the seed cases.
struct EpiCurve {
  std::vector<int> incidence;
  std::vector<std::uint8_t> mask;  // 1 = observed day

  EpiCurve() = default;
  explicit EpiCurve(std::vector<int> values);

  int horizon() const { return static_cast<int>(incidence.size()); }
  long long total() const;

  friend bool operator==(const EpiCurve&, const EpiCurve&) = default;
};

/// Compartment counts per day, recounted from the agent states.
struct CompartmentSeries {
  std::vector<int> susceptible;
  std::vector<int> infectious;
  std::vector<int> recovered;
};

struct SimulationResult {
  EpiCurve curve;
  CompartmentSeries compartments;
};

/// Stochastic SIR agent model over a fully connected population.
///
/// Day 0 seeds i0 distinct agents (recorded as incidence[0]). On each later
/// day, every agent infectious at the start of the day draws
/// K ~ Poisson(c_rate) contacts uniformly with replacement among the other
/// n - 1 agents; each contact that lands on an agent susceptible at the start
/// of the day transmits with probability p_tran. Then every agent that was
/// infectious at the start of the day recovers with probability p_recov.
/// Agents infected on day t become infectious on day t + 1.
///
/// Transmitting contacts are sampled directly as Poisson(c_rate * p_tran)
/// per infectious agent, which has the same law as thinning every contact.
/// Counts come from CDF inversion, so under a shared seed the curve changes
/// only when a rate crosses a jump of the Poisson CDF.
///
/// Thread-safe: all state is local to the call.
EpiCurve simulate(const EpiParams& params, int horizon, std::uint64_t seed);

/// Same dynamics as simulate(), additionally returning S/I/R counts.
SimulationResult simulate_detailed(const EpiParams& params, int horizon,
                                   std::uint64_t seed);

/// `reps` curves; run r uses child_seed(seed, r).
std::vector<EpiCurve> simulate_ensemble(const EpiParams& params, int horizon,
                                        int reps, std::uint64_t seed,
                                        int jobs = 1);

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `prob` in [0, 1]; `values` must be non-empty.
double quantile(std::vector<double> values, double prob);

/// Per-day quantile of an ensemble.
std::vector<double> daily_quantile(std::span<const EpiCurve> ensemble,
                                   double prob);

/// CSV with header `day,incidence`.
std::string curve_to_csv(const EpiCurve& curve);
EpiCurve curve_from_csv(const std::string& text);
void write_curve(const std::string& path, const EpiCurve& curve);
EpiCurve read_curve(const std::string& path);

}  // namespace abmcal
