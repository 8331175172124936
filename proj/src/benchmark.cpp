#include "abmcal/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "abmcal/csv.hpp"
#include "abmcal/errors.hpp"
#include "abmcal/parallel.hpp"

namespace abmcal::bench {

using Clock = std::chrono::steady_clock;

std::string method_key(Method m) { return m == Method::kMl ? "ml" : "abc"; }
std::string method_label(Method m) { return m == Method::kMl ? "BiLSTM" : "ABC"; }

Method parse_method(const std::string& key) {
  if (key == "ml") return Method::kMl;
  if (key == "abc") return Method::kAbc;
  throw std::invalid_argument("unknown method '" + key + "' (expected ml or abc)");
}

ParamErrorTable parameter_metrics(std::span<const Theta> estimates,
                                  std::span<const Theta> truths, const std::string& method) {
  if (estimates.size() != truths.size()) {
    throw std::invalid_argument("parameter_metrics: estimates and truths differ in length");
  }
  if (estimates.empty()) throw std::invalid_argument("parameter_metrics: no estimates");
  struct Field {
    const char* name;
    double Theta::*member;
  };
  static constexpr Field kFields[] = {
      {"R0", &Theta::r0}, {"c_rate", &Theta::c_rate}, {"p_tran", &Theta::p_tran}};
  ParamErrorTable table;
  const auto count = static_cast<double>(estimates.size());
  for (const auto& f : kFields) {
    std::vector<double> bias(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      bias[i] = estimates[i].*f.member - truths[i].*f.member;
    }
    double abs_sum = 0.0, sq_sum = 0.0, sum = 0.0;
    for (double b : bias) {
      abs_sum += std::abs(b);
      sq_sum += b * b;
      sum += b;
    }
    table.rows.push_back({f.name, method, abs_sum / count, std::sqrt(sq_sum / count),
                          sum / count, abc::median(bias)});
  }
  return table;
}

double PredictiveRow::coverage() const {
  if (covered.empty()) return 0.0;
  const auto hits = std::count(covered.begin(), covered.end(), std::uint8_t{1});
  return static_cast<double>(hits) / static_cast<double>(covered.size());
}

PredictiveRow predictive_eval(const EpiParams& calibrated, const Scenario& truth,
                              std::uint64_t seed, const PredictiveOptions& options) {
  if (options.reps < 2) throw std::invalid_argument("predictive_eval needs reps >= 2");
  const int horizon = truth.curve.horizon();
  EpiParams p = calibrated;
  p.n = truth.params.n;
  p.i0 = truth.params.i0;
  const auto ensemble = simulate_ensemble(p, horizon, options.reps, seed, options.jobs);

  PredictiveRow row;
  row.lower = daily_quantile(ensemble, 0.025);
  row.upper = daily_quantile(ensemble, 0.975);
  row.predicted.resize(horizon);
  row.bias.resize(horizon);
  row.relative_bias.resize(horizon);
  row.covered.resize(horizon);
  std::vector<double> column(ensemble.size());
  for (int t = 0; t < horizon; ++t) {
    for (std::size_t r = 0; r < ensemble.size(); ++r) column[r] = ensemble[r].incidence[t];
    row.predicted[t] =
        options.use_median
            ? abc::median(column)
            : std::accumulate(column.begin(), column.end(), 0.0) /
                  static_cast<double>(column.size());
    const double observed = truth.curve.incidence[t];
    row.bias[t] = observed - row.predicted[t];
    if (observed > 0.0) {
      row.relative_bias[t] = row.bias[t] / observed;
    } else {
      row.relative_bias[t] = std::numeric_limits<double>::quiet_NaN();
      ++row.excluded_days;
    }
    row.covered[t] = observed >= row.lower[t] && observed <= row.upper[t] ? 1 : 0;
  }
  return row;
}

PredictiveReport aggregate_predictive(const std::string& method,
                                      std::span<const PredictiveRow> rows) {
  PredictiveReport rep;
  rep.method = method;
  rep.scenarios = static_cast<int>(rows.size());
  if (rows.empty()) return rep;
  const std::size_t horizon = rows.front().bias.size();
  rep.mean_bias.assign(horizon, 0.0);
  rep.mean_relative_bias.assign(horizon, 0.0);
  rep.relative_bias_count.assign(horizon, 0);
  rep.coverage.assign(horizon, 0.0);
  rep.lower.assign(horizon, 0.0);
  rep.upper.assign(horizon, 0.0);
  double covered = 0.0;
  for (const auto& row : rows) {
    if (row.bias.size() != horizon) throw std::invalid_argument("rows differ in horizon");
    for (std::size_t t = 0; t < horizon; ++t) {
      rep.mean_bias[t] += row.bias[t];
      if (!std::isnan(row.relative_bias[t])) {
        rep.mean_relative_bias[t] += row.relative_bias[t];
        ++rep.relative_bias_count[t];
      }
      rep.coverage[t] += row.covered[t];
      rep.lower[t] += row.lower[t];
      rep.upper[t] += row.upper[t];
      covered += row.covered[t];
    }
    rep.excluded_days += row.excluded_days;
  }
  const auto n = static_cast<double>(rows.size());
  for (std::size_t t = 0; t < horizon; ++t) {
    rep.mean_bias[t] /= n;
    rep.mean_relative_bias[t] = rep.relative_bias_count[t] > 0
                                    ? rep.mean_relative_bias[t] / rep.relative_bias_count[t]
                                    : std::numeric_limits<double>::quiet_NaN();
    rep.coverage[t] /= n;
    rep.lower[t] /= n;
    rep.upper[t] /= n;
  }
  rep.overall_coverage = covered / (n * static_cast<double>(horizon));
  return rep;
}

TimingRow timing_summary(const std::string& method, std::span<const double> seconds) {
  TimingRow row;
  row.method = method;
  row.runs = static_cast<int>(seconds.size());
  if (seconds.empty()) return row;
  row.total_seconds = std::accumulate(seconds.begin(), seconds.end(), 0.0);
  row.mean_seconds = row.total_seconds / static_cast<double>(seconds.size());
  row.median_seconds = abc::median(std::vector<double>(seconds.begin(), seconds.end()));
  return row;
}

namespace {

struct MethodOutcome {
  bool ok = false;
  Theta estimate;
  double seconds = 0.0;
  PredictiveRow predictive;
  std::string error;
};

struct ScenarioWork {
  ScenarioResult result;
  std::vector<MethodOutcome> outcomes;  // per requested method
};

}  // namespace

BenchReport run_benchmark(const BenchConfig& config, const TrainedModel* model) {
  if (config.scenarios < 1) throw std::invalid_argument("need at least one scenario");
  config.prior.validate();
  const bool wants_ml = std::find(config.methods.begin(), config.methods.end(),
                                  Method::kMl) != config.methods.end();
  if (wants_ml && model == nullptr) {
    throw std::invalid_argument("method ml requested without a trained model");
  }
  const int horizon = config.predictive.horizon;

  std::vector<ScenarioWork> work(static_cast<std::size_t>(config.scenarios));
  parallel_for(work.size(), config.jobs, [&](std::size_t i) {
    const auto scenario_seed = child_seed(config.seed, i);
    auto& w = work[i];
    Scenario& truth = w.result.truth;
    Engine eng = make_engine(child_seed(scenario_seed, 0));
    truth.params = sample_params(config.prior, eng);
    truth.seed = child_seed(scenario_seed, 1);
    truth.curve = simulate(truth.params, horizon, truth.seed);

    PredictiveOptions popts = config.predictive;
    popts.jobs = 1;
    for (Method m : config.methods) {
      MethodOutcome out;
      try {
        EpiParams calibrated = truth.params;
        if (m == Method::kMl) {
          const auto pred = predict(*model, observe(truth));
          out.estimate = pred.theta;
          out.seconds = pred.seconds;
          calibrated.p_tran = pred.theta.p_tran;
          calibrated.c_rate = pred.theta.c_rate;
          calibrated.r0 = pred.theta.r0;
        } else {
          abc::AbcConfig cfg = config.abc;
          cfg.n = truth.params.n;
          cfg.i0 = truth.curve.incidence.front();
          cfg.seed = child_seed(scenario_seed, 2);
          const auto started = Clock::now();
          const auto trace = abc::run_lfmcmc(truth.curve, cfg);
          const auto est = abc::point_estimate(trace, cfg);
          out.seconds = std::chrono::duration<double>(Clock::now() - started).count();
          out.estimate = {est.p_tran, est.c_rate, est.r0};
          calibrated.p_tran = est.p_tran;
          calibrated.c_rate = est.c_rate;
          calibrated.p_recov = est.p_recov;
          calibrated.r0 = est.r0;
        }
        out.predictive = predictive_eval(calibrated, truth, child_seed(scenario_seed, 3), popts);
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      if (out.ok) {
        w.result.estimates[method_label(m)] = out.estimate;
        w.result.seconds[method_label(m)] = out.seconds;
      }
      w.outcomes.push_back(std::move(out));
    }
  });

  BenchReport report;
  for (std::size_t k = 0; k < config.methods.size(); ++k) {
    const Method m = config.methods[k];
    const std::string label = method_label(m);
    report.methods.push_back(label);
    std::vector<Theta> estimates, truths;
    std::vector<PredictiveRow> rows;
    std::vector<double> seconds;
    for (std::size_t i = 0; i < work.size(); ++i) {
      const auto& out = work[i].outcomes[k];
      if (!out.ok) {
        report.failures.push_back({static_cast<int>(i), label, out.error});
        continue;
      }
      const auto& tp = work[i].result.truth.params;
      estimates.push_back(out.estimate);
      truths.push_back({tp.p_tran, tp.c_rate, tp.r0});
      rows.push_back(out.predictive);
      seconds.push_back(out.seconds);
    }
    if (!estimates.empty()) {
      auto t = parameter_metrics(estimates, truths, label);
      report.errors.rows.insert(report.errors.rows.end(), t.rows.begin(), t.rows.end());
    }
    report.predictive.push_back(aggregate_predictive(label, rows));
    report.timings.push_back(timing_summary(label, seconds));
  }
  for (auto& w : work) report.scenarios.push_back(std::move(w.result));
  return report;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  return csv::format_double(v);
}

const PredictiveReport* find_method(const BenchReport& r, const std::string& label) {
  for (const auto& p : r.predictive) {
    if (p.method == label) return &p;
  }
  return nullptr;
}

std::size_t horizon_of(const BenchReport& r) {
  std::size_t h = 0;
  for (const auto& p : r.predictive) h = std::max(h, p.mean_bias.size());
  return h;
}

}  // namespace

std::map<std::string, std::string> render_report(const BenchReport& report) {
  std::map<std::string, std::string> files;
  const std::size_t horizon = report.methods.empty() ? 0 : horizon_of(report);

  std::string errors = "parameter,method,mae,rmse,mean_bias,median_bias\n";
  for (const auto& r : report.errors.rows) {
    errors += r.parameter + ',' + r.method + ',' + fmt(r.mae) + ',' + fmt(r.rmse) + ',' +
              fmt(r.mean_bias) + ',' + fmt(r.median_bias) + '\n';
  }
  files["param_errors.csv"] = std::move(errors);

  // Fixed five-column layout; methods that were not run are NA.
  const auto* abc_rep = find_method(report, "ABC");
  const auto* ml_rep = find_method(report, "BiLSTM");
  std::string bounds = "Day,ABC_Q2.5,ABC_Q97.5,BiLSTM_Q2.5,BiLSTM_Q97.5\n";
  std::string bounds_dat = "# day abc_q2.5 abc_q97.5 bilstm_q2.5 bilstm_q97.5\n";
  auto bound = [](const PredictiveReport* p, const std::vector<double> PredictiveReport::*v,
                  std::size_t t) {
    return p != nullptr && t < (p->*v).size() ? fmt((p->*v)[t]) : std::string("NA");
  };
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::string cols[] = {bound(abc_rep, &PredictiveReport::lower, t),
                                bound(abc_rep, &PredictiveReport::upper, t),
                                bound(ml_rep, &PredictiveReport::lower, t),
                                bound(ml_rep, &PredictiveReport::upper, t)};
    bounds += std::to_string(t);
    bounds_dat += std::to_string(t);
    for (const auto& c : cols) {
      bounds += ',' + c;
      bounds_dat += ' ' + c;
    }
    bounds += '\n';
    bounds_dat += '\n';
  }
  files["daily_bounds.csv"] = std::move(bounds);
  files["daily_bounds.dat"] = std::move(bounds_dat);

  std::string bc = "day";
  std::string bc_dat = "# day";
  for (const auto& p : report.predictive) {
    bc += ',' + p.method + "_bias," + p.method + "_relative_bias," + p.method + "_coverage";
    bc_dat += ' ' + p.method + "_bias " + p.method + "_relative_bias " + p.method + "_coverage";
  }
  bc += '\n';
  bc_dat += '\n';
  for (std::size_t t = 0; t < horizon; ++t) {
    bc += std::to_string(t);
    bc_dat += std::to_string(t);
    for (const auto& p : report.predictive) {
      const bool has = t < p.mean_bias.size();
      const std::string vals[] = {has ? fmt(p.mean_bias[t]) : "NA",
                                  has ? fmt(p.mean_relative_bias[t]) : "NA",
                                  has ? fmt(p.coverage[t]) : "NA"};
      for (const auto& v : vals) {
        bc += ',' + v;
        bc_dat += ' ' + v;
      }
    }
    bc += '\n';
    bc_dat += '\n';
  }
  files["bias_coverage.csv"] = std::move(bc);
  files["bias_coverage.dat"] = std::move(bc_dat);

  std::string summary = "method,scenarios,overall_coverage,excluded_days\n";
  for (const auto& p : report.predictive) {
    summary += p.method + ',' + std::to_string(p.scenarios) + ',' + fmt(p.overall_coverage) +
               ',' + std::to_string(p.excluded_days) + '\n';
  }
  files["coverage_summary.csv"] = std::move(summary);

  std::string timings = "method,mean_seconds,median_seconds,total_seconds,runs\n";
  for (const auto& t : report.timings) {
    timings += t.method + ',' + fmt(t.mean_seconds) + ',' + fmt(t.median_seconds) + ',' +
               fmt(t.total_seconds) + ',' + std::to_string(t.runs) + '\n';
  }
  files["timings.csv"] = std::move(timings);

  std::string est =
      "scenario,method,n,i0,p_recov,true_p_tran,true_c_rate,true_r0,est_p_tran,est_c_rate,"
      "est_r0\n";
  for (std::size_t i = 0; i < report.scenarios.size(); ++i) {
    const auto& s = report.scenarios[i];
    for (const auto& label : report.methods) {
      const auto it = s.estimates.find(label);
      if (it == s.estimates.end()) continue;
      const auto& p = s.truth.params;
      est += std::to_string(i) + ',' + label + ',' + std::to_string(p.n) + ',' +
             std::to_string(p.i0) + ',' + fmt(p.p_recov) + ',' + fmt(p.p_tran) + ',' +
             fmt(p.c_rate) + ',' + fmt(p.r0) + ',' + fmt(it->second.p_tran) + ',' +
             fmt(it->second.c_rate) + ',' + fmt(it->second.r0) + '\n';
    }
  }
  files["estimates.csv"] = std::move(est);

  std::string failures = "scenario,method,message\n";
  for (const auto& f : report.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    failures += std::to_string(f.scenario) + ',' + f.method + ',' + msg + '\n';
  }
  files["failures.csv"] = std::move(failures);
  return files;
}

void emit_report(const BenchReport& report, const std::string& out_dir,
                 const std::string& manifest_json) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create report directory '" + out_dir + "': " + ec.message());
  for (const auto& [name, content] : render_report(report)) {
    csv::write_file((std::filesystem::path(out_dir) / name).string(), content);
  }
  if (!manifest_json.empty()) {
    csv::write_file((std::filesystem::path(out_dir) / "manifest.json").string(), manifest_json);
  }
}

}  // namespace abmcal::bench
