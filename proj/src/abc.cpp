#include "abmcal/abc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/random/normal_distribution.hpp>

#include "abmcal/csv.hpp"
#include "abmcal/errors.hpp"

namespace abmcal::abc {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

bool AbcTheta::in_range() const {
  return std::isfinite(c_rate) && c_rate > 0.0 && p_recov > 0.0 && p_recov < 1.0 &&
         p_tran > 0.0 && p_tran < 1.0;
}

void AbcConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("burn-in must lie in [0, iterations)");
  }
  if (!(proposal_sd > 0.0)) throw std::invalid_argument("proposal sd must be positive");
  if (!(kernel_factor > 0.0)) throw std::invalid_argument("kernel factor must be positive");
  if (n < 2 || i0 < 1 || i0 > n) throw std::invalid_argument("fixed n/i0 out of range");
  if (!initial.in_range()) throw std::invalid_argument("initial chain state out of range");
  if (max_redraws < 0) throw std::invalid_argument("max redraws must be >= 0");
}

double AbcTrace::acceptance_rate() const {
  if (samples.empty()) return 0.0;
  const auto accepted = std::count_if(samples.begin(), samples.end(),
                                      [](const AbcSample& s) { return s.accepted; });
  return static_cast<double>(accepted) / static_cast<double>(samples.size());
}

std::optional<AbcTheta> propose(const AbcTheta& theta, double sd, Engine& eng,
                                int max_redraws) {
  boost::random::normal_distribution<double> noise(0.0, sd);
  AbcTheta next;
  next.c_rate = theta.c_rate * std::exp(noise(eng));
  bool valid = false;
  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    next.p_recov = theta.p_recov * std::exp(noise(eng));
    if (next.p_recov < 1.0) {
      valid = true;
      break;
    }
  }
  next.p_tran = logistic(logit(theta.p_tran) + noise(eng));
  if (!valid || !next.in_range()) return std::nullopt;
  return next;
}

double log_kernel_weight(std::span<const int> simulated, std::span<const int> observed,
                         double epsilon) {
  if (simulated.size() != observed.size()) {
    throw std::invalid_argument("kernel: series lengths differ");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("kernel: epsilon must be positive");
  double sq = 0.0;
  for (std::size_t t = 0; t < simulated.size(); ++t) {
    const double d = static_cast<double>(simulated[t]) - static_cast<double>(observed[t]);
    sq += d * d;
  }
  return -sq / (2.0 * epsilon * epsilon);
}

double kernel_weight(std::span<const int> simulated, std::span<const int> observed,
                     double epsilon) {
  return std::exp(log_kernel_weight(simulated, observed, epsilon));
}

double kernel_scale(std::span<const int> observed, double factor) {
  double sq = 0.0;
  for (int v : observed) sq += static_cast<double>(v) * static_cast<double>(v);
  return factor * std::sqrt(sq);
}

AbcTrace run_lfmcmc(const EpiCurve& observed, const AbcConfig& config) {
  config.validate();
  const int horizon = observed.horizon();
  if (horizon < 1) throw std::invalid_argument("observed series is empty");

  AbcTrace trace;
  trace.epsilon = kernel_scale(observed.incidence, config.kernel_factor);
  if (!(trace.epsilon > 0.0)) throw std::invalid_argument("observed series is all zero");

  Engine eng = make_engine(child_seed(config.seed, 0));
  const std::uint64_t sim_root = child_seed(config.seed, 1);
  auto score = [&](const AbcTheta& theta, int iteration) {
    EpiParams p;
    p.n = config.n;
    p.i0 = config.i0;
    p.c_rate = theta.c_rate;
    p.p_tran = theta.p_tran;
    p.p_recov = theta.p_recov;
    p.r0 = theta.p_tran * theta.c_rate / theta.p_recov;
    const std::uint64_t seed = config.seeding == SimulationSeeding::kPerChain
                                   ? sim_root
                                   : child_seed(sim_root, static_cast<std::uint64_t>(iteration + 1));
    try {
      const EpiCurve sim = simulate(p, horizon, seed);
      return log_kernel_weight(sim.incidence, observed.incidence, trace.epsilon);
    } catch (const std::exception& e) {
      throw std::runtime_error("simulation failed at iteration " + std::to_string(iteration) +
                               ": " + e.what());
    }
  };

  AbcTheta current = config.initial;
  double current_log_k = score(current, -1);
  trace.initial_log_kernel = current_log_k;
  trace.samples.reserve(static_cast<std::size_t>(config.iterations));

  for (int it = 0; it < config.iterations; ++it) {
    const auto candidate = propose(current, config.proposal_sd, eng, config.max_redraws);
    bool accepted = false;
    if (candidate) {
      const double log_k = score(*candidate, it);
      const double u = uniform01(eng);
      // u < min(1, K'/K)  <=>  log u < log K' - log K
      if (std::log(u) < log_k - current_log_k) {
        current = *candidate;
        current_log_k = log_k;
        accepted = true;
      }
    }
    trace.samples.push_back({current, std::exp(current_log_k), current_log_k, accepted});
  }
  return trace;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

AbcEstimate point_estimate(const AbcTrace& trace, const AbcConfig& config) {
  const auto begin = static_cast<std::size_t>(std::max(0, config.burn_in));
  if (trace.samples.size() <= begin) {
    throw std::invalid_argument("no samples after burn-in");
  }
  std::vector<double> c, r, p;
  for (std::size_t k = begin; k < trace.samples.size(); ++k) {
    c.push_back(trace.samples[k].theta.c_rate);
    r.push_back(trace.samples[k].theta.p_recov);
    p.push_back(trace.samples[k].theta.p_tran);
  }
  AbcEstimate est;
  est.c_rate = median(std::move(c));
  est.p_recov = median(std::move(r));
  est.p_tran = median(std::move(p));
  est.r0 = est.p_tran * est.c_rate / est.p_recov;
  return est;
}

std::string trace_to_csv(const AbcTrace& trace) {
  std::string out = "iter,c_rate,p_recov,p_tran,kernel,accepted\n";
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const auto& s = trace.samples[k];
    out += std::to_string(k) + ',' + csv::format_double(s.theta.c_rate) + ',' +
           csv::format_double(s.theta.p_recov) + ',' + csv::format_double(s.theta.p_tran) +
           ',' + csv::format_double(s.kernel) + ',' + (s.accepted ? "1" : "0") + '\n';
  }
  return out;
}

AbcTrace trace_from_csv(const std::string& text) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows.front() != "iter,c_rate,p_recov,p_tran,kernel,accepted") {
    throw SchemaError("trace file must start with 'iter,c_rate,p_recov,p_tran,kernel,accepted'");
  }
  AbcTrace trace;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto f = csv::split(rows[r]);
    if (f.size() != 6) throw SchemaError("trace row " + std::to_string(r) + ": expected 6 fields");
    if (csv::parse_int(f[0]) != static_cast<long long>(trace.samples.size())) {
      throw SchemaError("trace iterations must run 0,1,2,...");
    }
    AbcSample s;
    s.theta = {csv::parse_double(f[1]), csv::parse_double(f[2]), csv::parse_double(f[3])};
    s.kernel = csv::parse_double(f[4]);
    s.log_kernel = std::log(s.kernel);
    const auto acc = csv::parse_int(f[5]);
    if (acc != 0 && acc != 1) throw SchemaError("trace 'accepted' must be 0 or 1");
    s.accepted = acc == 1;
    trace.samples.push_back(s);
  }
  return trace;
}

}  // namespace abmcal::abc
