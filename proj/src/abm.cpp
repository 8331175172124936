#include "abmcal/abm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/random/uniform_int_distribution.hpp>

#include "abmcal/csv.hpp"
#include "abmcal/errors.hpp"
#include "abmcal/parallel.hpp"
#include "abmcal/rng.hpp"

namespace abmcal {

namespace {

enum class Status : std::uint8_t { kSusceptible, kInfectious, kRecovered };

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Poisson draws by CDF inversion, one uniform per draw (per chunk for large
// means). Unlike samplers that switch algorithm at a threshold mean, the
// draw for a fixed uniform changes only at CDF jumps as the mean moves, so
// nearby rates under a shared seed give nearby contact counts.
class PoissonInversion {
 public:
  explicit PoissonInversion(double mean) {
    chunks_ = mean > kChunk ? static_cast<int>(std::ceil(mean / kChunk)) : 1;
    mean_ = mean / chunks_;
    p0_ = std::exp(-mean_);
  }

  int operator()(Engine& eng) const {
    int total = 0;
    for (int j = 0; j < chunks_; ++j) total += draw(eng);
    return total;
  }

 private:
  static constexpr double kChunk = 500.0;

  int draw(Engine& eng) const {
    const double u = uniform01(eng);
    int k = 0;
    double p = p0_;
    double cdf = p;
    while (u >= cdf) {
      ++k;
      p *= mean_ / k;
      const double next = cdf + p;
      if (next == cdf) break;  // remaining tail below double resolution
      cdf = next;
    }
    return k;
  }

  int chunks_ = 1;
  double mean_ = 0.0;
  double p0_ = 1.0;
};

}  // namespace

void EpiParams::validate() const {
  require(std::isfinite(c_rate) && std::isfinite(p_tran) &&
              std::isfinite(p_recov) && std::isfinite(r0),
          "non-finite parameter");
  require(n >= 1, "n must be positive");
  require(i0 >= 1 && i0 <= n, "i0 must lie in [1, n]");
  require(c_rate > 0.0, "c_rate must be positive");
  require(p_tran >= 0.0 && p_tran <= 1.0, "p_tran must lie in [0, 1]");
  require(p_recov > 0.0 && p_recov <= 1.0, "p_recov must lie in (0, 1]");
}

EpiCurve::EpiCurve(std::vector<int> values)
    : incidence(std::move(values)), mask(incidence.size(), 1) {}

long long EpiCurve::total() const {
  return std::accumulate(incidence.begin(), incidence.end(), 0LL);
}

namespace {

// `comp` may be null when the caller only needs incidence.
EpiCurve run(const EpiParams& params, int horizon, std::uint64_t seed,
             CompartmentSeries* comp) {
  params.validate();
  require(horizon >= 1, "horizon must be >= 1");
  // A single agent has nobody to contact.
  require(params.n >= 2 || params.p_tran == 0.0 || horizon == 1,
          "n must be >= 2 for transmission");

  Engine eng = make_engine(seed);
  const int n = params.n;
  std::vector<Status> status(static_cast<std::size_t>(n), Status::kSusceptible);

  // Seed i0 distinct agents by a partial Fisher-Yates shuffle.
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<int> infectious;
  infectious.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < params.i0; ++k) {
    boost::random::uniform_int_distribution<int> pick(k, n - 1);
    std::swap(ids[k], ids[pick(eng)]);
    status[ids[k]] = Status::kInfectious;
    infectious.push_back(ids[k]);
  }
  std::sort(infectious.begin(), infectious.end());

  EpiCurve curve(std::vector<int>(static_cast<std::size_t>(horizon), 0));
  if (comp != nullptr) {
    comp->susceptible.assign(horizon, 0);
    comp->infectious.assign(horizon, 0);
    comp->recovered.assign(horizon, 0);
  }
  auto record = [&](int day) {
    if (comp == nullptr) return;
    int s = 0, i = 0, r = 0;
    for (Status st : status) {
      s += st == Status::kSusceptible;
      i += st == Status::kInfectious;
      r += st == Status::kRecovered;
    }
    comp->susceptible[day] = s;
    comp->infectious[day] = i;
    comp->recovered[day] = r;
  };

  curve.incidence[0] = params.i0;
  record(0);

  // Each contact transmits independently with probability p_tran, so the
  // transmitting contacts of one agent are Poisson(c_rate * p_tran) and land
  // uniformly on the other agents. Drawing them directly is equal in law to
  // drawing every contact and thinning afterwards.
  const PoissonInversion transmitting(params.c_rate * params.p_tran);
  boost::random::uniform_int_distribution<int> other(0, std::max(0, n - 2));
  std::vector<int> newly;
  std::vector<int> still;
  newly.reserve(static_cast<std::size_t>(n));
  still.reserve(static_cast<std::size_t>(n));

  for (int day = 1; day < horizon; ++day) {
    newly.clear();
    // Infections resolve against the start-of-day state: agents infected
    // today are marked infectious but are not in `infectious` until tomorrow.
    for (int source : infectious) {
      const int k = transmitting(eng);
      for (int c = 0; c < k; ++c) {
        int target = other(eng);
        if (target >= source) ++target;
        if (status[target] != Status::kSusceptible) continue;
        status[target] = Status::kInfectious;
        newly.push_back(target);
      }
    }
    still.clear();
    for (int agent : infectious) {
      if (uniform01(eng) < params.p_recov) {
        status[agent] = Status::kRecovered;
      } else {
        still.push_back(agent);
      }
    }
    still.insert(still.end(), newly.begin(), newly.end());
    infectious.swap(still);
    curve.incidence[day] = static_cast<int>(newly.size());
    record(day);
  }
  return curve;
}

}  // namespace

SimulationResult simulate_detailed(const EpiParams& params, int horizon,
                                   std::uint64_t seed) {
  SimulationResult result;
  result.curve = run(params, horizon, seed, &result.compartments);
  return result;
}

EpiCurve simulate(const EpiParams& params, int horizon, std::uint64_t seed) {
  return run(params, horizon, seed, nullptr);
}

std::vector<EpiCurve> simulate_ensemble(const EpiParams& params, int horizon,
                                        int reps, std::uint64_t seed,
                                        int jobs) {
  require(reps >= 1, "reps must be >= 1");
  std::vector<EpiCurve> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), jobs, [&](std::size_t r) {
    out[r] = simulate(params, horizon, child_seed(seed, r));
  });
  return out;
}

double quantile(std::vector<double> values, double prob) {
  require(!values.empty(), "quantile of empty sample");
  require(prob >= 0.0 && prob <= 1.0, "quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> daily_quantile(std::span<const EpiCurve> ensemble,
                                   double prob) {
  require(!ensemble.empty(), "empty ensemble");
  const int horizon = ensemble.front().horizon();
  std::vector<double> out(static_cast<std::size_t>(horizon));
  std::vector<double> column(ensemble.size());
  for (int day = 0; day < horizon; ++day) {
    for (std::size_t r = 0; r < ensemble.size(); ++r) {
      require(ensemble[r].horizon() == horizon, "ragged ensemble");
      column[r] = ensemble[r].incidence[day];
    }
    out[day] = quantile(column, prob);
  }
  return out;
}

std::string curve_to_csv(const EpiCurve& curve) {
  std::string out = "day,incidence\n";
  for (int day = 0; day < curve.horizon(); ++day) {
    out += std::to_string(day);
    out += ',';
    out += std::to_string(curve.incidence[day]);
    out += '\n';
  }
  return out;
}

EpiCurve curve_from_csv(const std::string& text) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows.front() != "day,incidence") {
    throw SchemaError("curve file must start with header 'day,incidence'");
  }
  std::vector<int> values;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto fields = csv::split(rows[i]);
    if (fields.size() != 2) {
      throw SchemaError("curve row " + std::to_string(i) + ": expected 2 fields");
    }
    const auto day = csv::parse_int(fields[0]);
    const auto count = csv::parse_int(fields[1]);
    if (day != static_cast<long long>(values.size())) {
      throw SchemaError("curve days must run 0,1,2,... without gaps");
    }
    if (count < 0) throw SchemaError("negative incidence on day " + std::to_string(day));
    values.push_back(static_cast<int>(count));
  }
  if (values.empty()) throw SchemaError("curve file has no rows");
  return EpiCurve(std::move(values));
}

void write_curve(const std::string& path, const EpiCurve& curve) {
  csv::write_file(path, curve_to_csv(curve));
}

EpiCurve read_curve(const std::string& path) {
  return curve_from_csv(csv::read_file(path));
}

}  // namespace abmcal
