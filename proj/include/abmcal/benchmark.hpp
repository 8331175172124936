#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abmcal/abc.hpp"
#include "abmcal/abm.hpp"
#include "abmcal/calibrator.hpp"
#include "abmcal/scenario.hpp"

namespace abmcal::bench {

enum class Method { kMl, kAbc };

/// "ml" / "abc" on the command line; "BiLSTM" / "ABC" in reports.
std::string method_key(Method m);
std::string method_label(Method m);
Method parse_method(const std::string& key);

struct ParamErrorRow {
  std::string parameter;  // R0, c_rate, p_tran
  std::string method;
  double mae = 0.0;
  double rmse = 0.0;
  double mean_bias = 0.0;
  double median_bias = 0.0;
};

struct ParamErrorTable {
  std::vector<ParamErrorRow> rows;
};

/// Error metrics of estimates against index-aligned truths, one row per
/// parameter (R0, c_rate, p_tran). bias = estimate - truth.
ParamErrorTable parameter_metrics(std::span<const Theta> estimates,
                                  std::span<const Theta> truths,
                                  const std::string& method);

/// Forward-simulation check of one calibrated parameter set.
struct PredictiveRow {
  std::vector<double> predicted;  // I-hat_t
  std::vector<double> bias;       // I_t - I-hat_t
  std::vector<double> relative_bias;  // bias / I_t, NaN where I_t == 0
  std::vector<double> lower;      // 2.5% envelope quantile
  std::vector<double> upper;      // 97.5% envelope quantile
  std::vector<std::uint8_t> covered;
  int excluded_days = 0;          // days with I_t == 0

  double coverage() const;
};

struct PredictiveOptions {
  int reps = 100;
  int horizon = 60;
  bool use_median = false;  // I-hat_t as pointwise median instead of mean
  int jobs = 1;
};

/// Simulates `reps` curves from the calibrated parameters (with the truth's
/// n and i0) and compares them to the truth's observed curve.
PredictiveRow predictive_eval(const EpiParams& calibrated, const Scenario& truth,
                              std::uint64_t seed, const PredictiveOptions& options = {});

/// Per-method aggregate over scenarios.
struct PredictiveReport {
  std::string method;
  std::vector<double> mean_bias;
  std::vector<double> mean_relative_bias;
  std::vector<int> relative_bias_count;  // scenarios with I_t > 0 per day
  std::vector<double> coverage;          // per-day fraction covered
  std::vector<double> lower;             // mean over scenarios of 2.5% bound
  std::vector<double> upper;             // mean over scenarios of 97.5% bound
  double overall_coverage = 0.0;
  int excluded_days = 0;
  int scenarios = 0;
};

PredictiveReport aggregate_predictive(const std::string& method,
                                      std::span<const PredictiveRow> rows);

struct TimingRow {
  std::string method;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  double total_seconds = 0.0;
  int runs = 0;
};

TimingRow timing_summary(const std::string& method, std::span<const double> seconds);

struct Failure {
  int scenario = 0;
  std::string method;
  std::string message;
};

/// Per-scenario record of one benchmark run.
struct ScenarioResult {
  Scenario truth;
  std::map<std::string, Theta> estimates;   // by method label
  std::map<std::string, double> seconds;
};

struct BenchConfig {
  int scenarios = 100;
  std::vector<Method> methods{Method::kMl, Method::kAbc};
  PriorConfig prior{};
  abc::AbcConfig abc{};  // n, i0 and seed are set per scenario
  PredictiveOptions predictive{};
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct BenchReport {
  std::vector<std::string> methods;  // labels, in requested order
  ParamErrorTable errors;
  std::vector<PredictiveReport> predictive;
  std::vector<TimingRow> timings;
  std::vector<ScenarioResult> scenarios;
  std::vector<Failure> failures;
};

/// Draws fresh test scenarios from the prior, calibrates each with every
/// requested method (timing each call), and aggregates all reports. A
/// scenario that fails for one method is listed in `failures` and left out
/// of that method's aggregates.
BenchReport run_benchmark(const BenchConfig& config, const TrainedModel* model);

/// Writes param_errors.csv, daily_bounds.csv, bias_coverage.csv,
/// timings.csv, estimates.csv, failures.csv, gnuplot data files (*.dat) and,
/// when `manifest_json` is non-empty, manifest.json. Creates `out_dir` if
/// needed. Only timings.csv carries wall-clock values.
void emit_report(const BenchReport& report, const std::string& out_dir,
                 const std::string& manifest_json = {});

/// File name -> content, as written by emit_report.
std::map<std::string, std::string> render_report(const BenchReport& report);

}  // namespace abmcal::bench
