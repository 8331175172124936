#include "abmcal/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "abmcal/csv.hpp"
#include "abmcal/errors.hpp"
#include "abmcal/parallel.hpp"

namespace abmcal {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo > 0.0 && r.lo < r.hi && std::isfinite(r.hi))) {
    throw std::invalid_argument(std::string("invalid prior range for ") + name);
  }
}

double draw(const Range& r, Engine& eng) {
  return boost::random::uniform_real_distribution<double>(r.lo, r.hi)(eng);
}

}  // namespace

void PriorConfig::validate() const {
  check_range(n, "n");
  check_range(p_recov, "p_recov");
  check_range(i0, "i0");
  check_range(r0, "r0");
  check_range(c_rate, "c_rate");
  if (p_recov.hi > 1.0) throw std::invalid_argument("p_recov prior exceeds 1");
  if (i0.hi > n.lo) throw std::invalid_argument("i0 prior can exceed n");
  if (r0.hi * p_recov.hi / c_rate.lo > 1.0) {
    throw std::invalid_argument("prior admits p_tran > 1");
  }
}

EpiParams sample_params(const PriorConfig& prior, Engine& eng) {
  EpiParams p;
  p.n = static_cast<int>(std::lround(draw(prior.n, eng)));
  p.p_recov = draw(prior.p_recov, eng);
  p.i0 = static_cast<int>(std::lround(draw(prior.i0, eng)));
  p.r0 = draw(prior.r0, eng);
  p.c_rate = draw(prior.c_rate, eng);
  p.p_tran = p.r0 * p.p_recov / p.c_rate;
  return p;
}

std::vector<Scenario> generate_dataset(int count, int horizon,
                                       const PriorConfig& prior,
                                       std::uint64_t seed, int jobs) {
  if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
  prior.validate();
  std::vector<Scenario> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    const auto scenario_seed = child_seed(seed, i);
    Engine eng = make_engine(child_seed(scenario_seed, 0));
    Scenario& s = out[i];
    s.params = sample_params(prior, eng);
    s.seed = child_seed(scenario_seed, 1);
    s.curve = simulate(s.params, horizon, s.seed);
  });
  return out;
}

std::string dataset_to_csv(std::span<const Scenario> scenarios) {
  const int horizon = scenarios.empty() ? 0 : scenarios.front().curve.horizon();
  std::string out = "scenario,seed,n,i0,c_rate,p_tran,p_recov,r0";
  for (int d = 0; d < horizon; ++d) out += ",day" + std::to_string(d);
  out += '\n';
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& s = scenarios[i];
    if (s.curve.horizon() != horizon) {
      throw std::invalid_argument("dataset scenarios differ in horizon");
    }
    out += std::to_string(i) + ',' + std::to_string(s.seed) + ',' +
           std::to_string(s.params.n) + ',' + std::to_string(s.params.i0) + ',' +
           csv::format_double(s.params.c_rate) + ',' +
           csv::format_double(s.params.p_tran) + ',' +
           csv::format_double(s.params.p_recov) + ',' +
           csv::format_double(s.params.r0);
    for (int v : s.curve.incidence) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

std::vector<Scenario> dataset_from_csv(const std::string& text) {
  const auto rows = csv::lines(text);
  if (rows.empty()) throw SchemaError("dataset file is empty");
  const auto header = csv::split(rows.front());
  static constexpr const char* kFixed[] = {"scenario", "seed",   "n",       "i0",
                                           "c_rate",   "p_tran", "p_recov", "r0"};
  constexpr std::size_t kFixedCount = std::size(kFixed);
  if (header.size() < kFixedCount) throw SchemaError("dataset header too short");
  for (std::size_t k = 0; k < kFixedCount; ++k) {
    if (header[k] != kFixed[k]) {
      throw SchemaError("dataset header column " + std::to_string(k) +
                        " should be '" + kFixed[k] + "'");
    }
  }
  const std::size_t horizon = header.size() - kFixedCount;
  for (std::size_t d = 0; d < horizon; ++d) {
    if (header[kFixedCount + d] != "day" + std::to_string(d)) {
      throw SchemaError("dataset day columns must be day0..dayH-1");
    }
  }
  std::vector<Scenario> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto f = csv::split(rows[r]);
    if (f.size() != header.size()) {
      throw SchemaError("dataset row " + std::to_string(r) + " has " +
                        std::to_string(f.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    if (csv::parse_int(f[0]) != static_cast<long long>(out.size())) {
      throw SchemaError("dataset scenario indices must be 0,1,2,...");
    }
    Scenario s;
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), seed);
    if (ec != std::errc{} || ptr != f[1].data() + f[1].size()) {
      throw SchemaError("bad seed in dataset row " + std::to_string(r));
    }
    s.seed = seed;
    s.params.n = static_cast<int>(csv::parse_int(f[2]));
    s.params.i0 = static_cast<int>(csv::parse_int(f[3]));
    s.params.c_rate = csv::parse_double(f[4]);
    s.params.p_tran = csv::parse_double(f[5]);
    s.params.p_recov = csv::parse_double(f[6]);
    s.params.r0 = csv::parse_double(f[7]);
    std::vector<int> values(horizon);
    for (std::size_t d = 0; d < horizon; ++d) {
      values[d] = static_cast<int>(csv::parse_int(f[kFixedCount + d]));
    }
    s.curve = EpiCurve(std::move(values));
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::string& path, std::span<const Scenario> scenarios) {
  csv::write_file(path, dataset_to_csv(scenarios));
}

std::vector<Scenario> read_dataset(const std::string& path) {
  return dataset_from_csv(csv::read_file(path));
}

Split split_dataset(std::span<const Scenario> all, double validation_fraction,
                    std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in (0, 1)");
  }
  if (all.size() < 2) throw std::invalid_argument("need at least 2 scenarios to split");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Engine eng = make_engine(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(eng)]);
  }
  auto n_val = static_cast<std::size_t>(
      std::lround(validation_fraction * static_cast<double>(all.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, all.size() - 1);
  Split split;
  const std::size_t n_train = all.size() - n_val;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? split.train : split.validation).push_back(all[order[k]]);
  }
  return split;
}

}  // namespace abmcal
