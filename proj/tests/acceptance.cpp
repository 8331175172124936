// Acceptance suite. `acceptance <n>` runs criterion n (1-9) and prints one
// PASS/FAIL line; `acceptance all` runs every criterion in turn. The exit
// status is non-zero if any criterion that ran failed.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "abmcal/abc.hpp"
#include "abmcal/abm.hpp"
#include "abmcal/benchmark.hpp"
#include "abmcal/calibrator.hpp"
#include "abmcal/csv.hpp"
#include "abmcal/rng.hpp"
#include "abmcal/scalers.hpp"
#include "abmcal/scenario.hpp"

namespace fs = std::filesystem;
using namespace abmcal;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Desk-scale network for the recovery and ablation runs. The full 3 x 160
// network costs about 30 s per epoch on one core, so 100 epochs would not fit
// the 30 minute budget.
TrainConfig desk_train_config() {
  TrainConfig c;
  c.network.hidden_size = 32;
  c.network.num_layers = 2;
  c.network.dense_units = 32;
  c.max_epochs = 100;
  c.patience = 15;
  c.learning_rate = 1e-3;
  c.dropout = 0.2;
  c.batch_size = 64;
  c.seed = 3;
  return c;
}

LossConfig desk_loss_config(double lambda) {
  LossConfig l;
  l.lambda = lambda;
  l.weights = {1.0, 0.1, 1.0};
  return l;
}

struct DeskData {
  Split split;
  Scalers scalers;
  std::vector<Scenario> test;
};

DeskData desk_data(int train_count, int test_count) {
  DeskData d;
  const auto all = generate_dataset(train_count, 60, PriorConfig{}, 101, 1);
  d.split = split_dataset(all, 0.1, 7);
  d.scalers = fit_scalers(d.split.train);
  d.test = generate_dataset(test_count, 60, PriorConfig{}, 202, 1);
  return d;
}

void log_epoch(const EpochRecord& r) {
  if (r.epoch % 10 == 0) {
    std::fprintf(stderr, "  epoch %d train %.4f val %.4f\n", r.epoch, r.train_loss, r.val_loss);
  }
}

// 1. Conservation and determinism.
Outcome conservation() {
  const auto t0 = Clock::now();
  auto eng = make_engine(1);
  int violations = 0, mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto p = sample_params(PriorConfig{}, eng);
    const auto seed = child_seed(11, k);
    const auto res = simulate_detailed(p, 60, seed);
    long long cumulative = 0;
    for (int t = 0; t < 60; ++t) {
      const auto& c = res.compartments;
      cumulative += res.curve.incidence[t];
      if (c.susceptible[t] + c.infectious[t] + c.recovered[t] != p.n || cumulative > p.n) {
        ++violations;
      }
    }
    if (curve_to_csv(simulate(p, 60, seed)) != curve_to_csv(res.curve)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "1000 runs, " << violations << " conservation violations, " << mismatches
     << " rerun mismatches, " << secs << " s (limit 60 s)";
  return {violations == 0 && mismatches == 0 && secs < 60.0, os.str()};
}

// 2. Prior identity.
Outcome prior_identity() {
  const auto t0 = Clock::now();
  auto eng = make_engine(2);
  int outside = 0;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_params(PriorConfig{}, eng);
    const bool inside = p.n >= 5000 && p.n <= 10000 && p.p_recov >= 0.071 && p.p_recov <= 0.25 &&
                        p.i0 >= 100 && p.i0 <= 2000 && p.r0 >= 1.0 && p.r0 <= 5.0 &&
                        p.c_rate >= 5.0 && p.c_rate <= 15.0 && p.p_tran > 0.0 && p.p_tran <= 1.0;
    if (!inside) ++outside;
    worst = std::max(worst, std::abs(p.r0 * p.p_recov - p.p_tran * p.c_rate));
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "10000 draws, " << outside << " outside the box, max identity residual " << worst
     << " (limit 1e-12), " << secs << " s";
  return {outside == 0 && worst <= 1e-12 && secs < 10.0, os.str()};
}

// 3. Gradient oracle: full loss against central differences.
Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  nn::NetworkConfig cfg;
  cfg.num_layers = 1;
  cfg.hidden_size = 8;
  cfg.dense_units = 6;
  Engine eng(99);
  double worst = 0.0;
  long checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto w = nn::NetworkWeights::initialized(cfg, seed);
    LabeledBatch lb;
    lb.batch.steps = 5;
    lb.batch.size = 3;
    lb.batch.inputs = nn::Matrix(1, 15);
    lb.batch.mask = nn::Matrix::Ones(5, 3);
    lb.batch.statics = nn::Matrix(2, 3);
    for (Eigen::Index i = 0; i < 15; ++i) lb.batch.inputs(i) = uniform01(eng);
    for (Eigen::Index i = 0; i < 6; ++i) lb.batch.statics(i) = uniform01(eng);
    lb.targets = nn::Matrix(3, 3);
    lb.p_recov = Eigen::RowVectorXd(3);
    for (int b = 0; b < 3; ++b) {
      lb.targets(0, b) = 0.01 + 0.2 * uniform01(eng);
      lb.targets(1, b) = 5.0 + 10.0 * uniform01(eng);
      lb.targets(2, b) = 1.0 + 4.0 * uniform01(eng);
      lb.p_recov(b) = 0.071 + 0.18 * uniform01(eng);
    }
    const LossConfig lc;
    const auto analytic = loss_gradient(lb, w, lc);
    auto probe = w;
    auto tensors = probe.tensors();
    const auto grads = analytic.gradient.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      nn::Matrix& t = *tensors[k].second;
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double keep = t(i);
        t(i) = keep + 1e-4;
        const double up = loss_gradient(lb, probe, lc).value;
        t(i) = keep - 1e-4;
        const double down = loss_gradient(lb, probe, lc).value;
        t(i) = keep;
        const double numeric = (up - down) / 2e-4;
        const double a = (*grads[k].second)(i);
        const double scale = std::max({std::abs(numeric), std::abs(a), 1e-5});
        worst = std::max(worst, std::abs(numeric - a) / scale);
        ++checked;
      }
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << checked << " coordinates over 20 seeds, worst relative error " << worst
     << " (limit 1e-4), " << secs << " s";
  return {worst < 1e-4 && secs < 60.0, os.str()};
}

struct Recovery {
  double mae_p_tran = 0.0;
  double mae_c_rate = 0.0;
  double mae_r0 = 0.0;
  double consistency = 0.0;
};

Recovery evaluate(const TrainedModel& model, const std::vector<Scenario>& test) {
  std::vector<Observation> obs;
  std::vector<Theta> truth;
  for (const auto& s : test) {
    obs.push_back(observe(s));
    truth.push_back({s.params.p_tran, s.params.c_rate, s.params.r0});
  }
  const auto est = predict_many(model, obs);
  Recovery r;
  for (const auto& row : bench::parameter_metrics(est, truth, "BiLSTM").rows) {
    if (row.parameter == "p_tran") r.mae_p_tran = row.mae;
    if (row.parameter == "c_rate") r.mae_c_rate = row.mae;
    if (row.parameter == "R0") r.mae_r0 = row.mae;
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    r.consistency += std::abs(est[i].r0 * obs[i].p_recov - est[i].p_tran * est[i].c_rate);
  }
  r.consistency /= static_cast<double>(est.size());
  return r;
}

// 4. Desk-scale recovery.
Outcome recovery() {
  const auto t0 = Clock::now();
  const auto data = desk_data(2000, 200);
  const auto model =
      train(data.split.train, data.split.validation, data.scalers, desk_train_config(),
            desk_loss_config(1.0), log_epoch);
  const auto r = evaluate(model, data.test);
  const double secs = seconds_since(t0);
  const bool p_ok = r.mae_p_tran <= 0.10, r_ok = r.mae_r0 <= 0.15, c_ok = r.mae_c_rate <= 2.0;
  std::ostringstream os;
  os << "MAE(p_tran)=" << r.mae_p_tran << (p_ok ? " ok" : " FAIL") << " (<= 0.10), MAE(R0)="
     << r.mae_r0 << (r_ok ? " ok" : " FAIL") << " (<= 0.15), MAE(c_rate)=" << r.mae_c_rate
     << (c_ok ? " ok" : " FAIL") << " (<= 2.0), best epoch " << model.metadata.best_epoch << ", "
     << secs << " s (limit 1800 s)";
  return {p_ok && r_ok && c_ok && secs <= 1800.0, os.str()};
}

EpiCurve observed_curve() {
  return simulate({6000, 150, 9.0, 0.025, 0.12, 0.025 * 9.0 / 0.12}, 60, 5);
}

// 5. Kernel and chain correctness.
Outcome abc_correctness() {
  std::vector<std::string> failed;
  const std::vector<int> obs{3, 4}, zeros{0, 0}, ones{1, 1};
  if (abc::kernel_weight(obs, obs, 0.25) != 1.0) failed.push_back("K=1 identity");
  if (std::abs(abc::kernel_weight(ones, zeros, 1.0) - std::exp(-1.0)) > 1e-12) {
    failed.push_back("K=e^-1 at eps*sqrt(2)");
  }
  if (std::abs(abc::log_kernel_weight(zeros, obs, abc::kernel_scale(obs, 0.05)) + 200.0) > 1e-12) {
    failed.push_back("exp(-200) case");
  }

  const auto curve = observed_curve();
  abc::AbcConfig cfg;
  cfg.n = 6000;
  cfg.i0 = 150;
  cfg.proposal_sd = 1e-12;
  cfg.seed = 3;
  const auto trace = abc::run_lfmcmc(curve, cfg);
  bool still = true;
  for (const auto& s : trace.samples) {
    still = still && std::abs(s.theta.c_rate - cfg.initial.c_rate) < 1e-9 &&
            std::abs(s.theta.p_recov - cfg.initial.p_recov) < 1e-9 &&
            std::abs(s.theta.p_tran - cfg.initial.p_tran) < 1e-9;
  }
  if (trace.acceptance_rate() != 1.0 || !still) failed.push_back("degenerate chain");

  abc::AbcTrace synthetic;
  for (int i = 0; i < 2000; ++i) synthetic.samples.push_back({{1.0 + i, 0.1, 0.02}, 1.0, 0.0, true});
  abc::AbcConfig window;
  window.n = 6000;
  window.i0 = 150;
  if (abc::point_estimate(synthetic, window).c_rate != 1500.5) failed.push_back("burn-in window");

  std::ostringstream os;
  os << "kernel closed forms, degenerate chain (acceptance " << trace.acceptance_rate()
     << "), burn-in 1000 of 2000";
  for (const auto& f : failed) os << "; failed: " << f;
  return {failed.empty(), os.str()};
}

// 6. Speed ordering.
Outcome speed() {
  TrainedModel model;
  model.weights = nn::NetworkWeights::initialized(nn::NetworkConfig{}, 1);
  model.scalers = fit_scalers(generate_dataset(50, 60, PriorConfig{}, 4, 1));
  model.metadata.horizon = 60;
  bench::BenchConfig cfg;
  cfg.scenarios = 20;
  cfg.seed = 6;
  cfg.predictive.reps = 10;
  const auto rep = bench::run_benchmark(cfg, &model);
  double ml = 0.0, abc = 0.0;
  for (const auto& t : rep.timings) (t.method == "BiLSTM" ? ml : abc) = t.mean_seconds;
  std::ostringstream os;
  os << "20 scenarios, full-size network inference " << ml << " s vs 2000-iteration ABC " << abc
     << " s per calibration, ratio " << (ml > 0.0 ? abc / ml : 0.0) << " (need >= 10)";
  return {rep.failures.empty() && ml > 0.0 && ml * 10.0 <= abc, os.str()};
}

// 7. Ground-truth coverage and the bounds table layout.
Outcome coverage() {
  const auto data = generate_dataset(50, 60, PriorConfig{}, 77, 1);
  std::vector<bench::PredictiveRow> rows;
  bool monotone = true;
  for (std::size_t i = 0; i < data.size(); ++i) {
    rows.push_back(bench::predictive_eval(data[i].params, data[i], child_seed(78, i)));
    for (int t = 0; t < 60; ++t) monotone = monotone && rows.back().lower[t] <= rows.back().upper[t];
  }
  bench::BenchReport report;
  report.methods = {"BiLSTM", "ABC"};
  report.predictive = {bench::aggregate_predictive("BiLSTM", rows),
                       bench::aggregate_predictive("ABC", rows)};
  const double cov = report.predictive[0].overall_coverage;
  const auto files = bench::render_report(report);
  const auto lines = csv::lines(files.at("daily_bounds.csv"));
  bool layout = !lines.empty() && lines[0] == "Day,ABC_Q2.5,ABC_Q97.5,BiLSTM_Q2.5,BiLSTM_Q97.5" &&
                lines.size() == 61;
  for (std::size_t i = 1; layout && i < lines.size(); ++i) {
    const auto f = csv::split(lines[i]);
    layout = f.size() == 5 && csv::parse_int(f[0]) == static_cast<long long>(i - 1) &&
             csv::parse_double(f[1]) <= csv::parse_double(f[2]) &&
             csv::parse_double(f[3]) <= csv::parse_double(f[4]);
  }
  std::ostringstream os;
  os << "50 scenarios x 100 reps, overall coverage " << cov << " (need [0.80, 1.00]), envelopes "
     << (monotone ? "monotone" : "NOT monotone") << ", daily_bounds layout "
     << (layout ? "ok" : "wrong");
  return {cov >= 0.80 && cov <= 1.0 && monotone && layout, os.str()};
}

// 8. Consistency-penalty ablation.
Outcome ablation() {
  const auto data = desk_data(2000, 200);
  const auto with = train(data.split.train, data.split.validation, data.scalers,
                          desk_train_config(), desk_loss_config(1.0), log_epoch);
  const auto without = train(data.split.train, data.split.validation, data.scalers,
                             desk_train_config(), desk_loss_config(0.0), log_epoch);
  const double a = evaluate(with, data.test).consistency;
  const double b = evaluate(without, data.test).consistency;
  std::ostringstream os;
  os << "mean |R0*p_recov - p_tran*c_rate|: lambda=1 " << a << ", lambda=0 " << b;
  return {a <= b, os.str()};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ABMCAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 9. Round trips and byte-identical bench output.
Outcome round_trips() {
  std::vector<std::string> failed;
  const auto dir = fs::temp_directory_path() / "abmcal_acceptance_roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (dir / name).string(); };

  const auto data = generate_dataset(30, 60, PriorConfig{}, 9, 1);
  write_dataset(path("data.csv"), data);
  const auto data_back = read_dataset(path("data.csv"));
  if (dataset_to_csv(data_back) != dataset_to_csv(data)) failed.push_back("dataset csv");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& a = data[i].params;
    const auto& b = data_back[i].params;
    if (a.p_tran != b.p_tran || a.c_rate != b.c_rate || a.r0 != b.r0 || a.p_recov != b.p_recov) {
      failed.push_back("dataset values");
      break;
    }
  }
  write_curve(path("curve.csv"), data[0].curve);
  if (!(read_curve(path("curve.csv")) == data[0].curve)) failed.push_back("curve csv");

  TrainConfig tc;
  tc.network.num_layers = 2;
  tc.network.hidden_size = 6;
  tc.network.dense_units = 5;
  tc.max_epochs = 2;
  const auto split = split_dataset(data, 0.2, 1);
  const auto model = train(split.train, split.validation, fit_scalers(split.train), tc, LossConfig{});
  save_model(model, path("model.json"));
  const auto loaded = load_model(path("model.json"));
  const auto p1 = predict(model, observe(data[0])).theta;
  const auto p2 = predict(loaded, observe(data[0])).theta;
  if (!(loaded.weights == model.weights) || !(loaded.scalers == model.scalers) ||
      p1.p_tran != p2.p_tran || p1.c_rate != p2.c_rate || p1.r0 != p2.r0) {
    failed.push_back("model save/load");
  }
  if (!(scalers_from_json(scalers_to_json(model.scalers)) == model.scalers)) failed.push_back("scalers json");

  abc::AbcConfig ac;
  ac.iterations = 100;
  ac.burn_in = 10;
  ac.n = data[0].params.n;
  ac.i0 = data[0].params.i0;
  const auto trace = abc::run_lfmcmc(data[0].curve, ac);
  const auto trace_text = abc::trace_to_csv(trace);
  const auto trace_back = abc::trace_from_csv(trace_text);
  bool trace_ok = abc::trace_to_csv(trace_back) == trace_text;
  for (std::size_t i = 0; trace_ok && i < trace.samples.size(); ++i) {
    trace_ok = trace_back.samples[i].theta.c_rate == trace.samples[i].theta.c_rate &&
               trace_back.samples[i].theta.p_recov == trace.samples[i].theta.p_recov &&
               trace_back.samples[i].theta.p_tran == trace.samples[i].theta.p_tran &&
               trace_back.samples[i].kernel == trace.samples[i].kernel;
  }
  if (!trace_ok) failed.push_back("trace csv");

  const std::string args = "--seed 7 --jobs 1 bench --scenarios 3 --methods ml,abc --iterations 300 "
                           "--burn-in 100 --model " + path("model.json") + " --out ";
  if (run_cli(args + path("bench_a")) != 0 || run_cli(args + path("bench_b")) != 0) {
    failed.push_back("bench run");
  } else {
    int files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "bench_a")) {
      const auto name = entry.path().filename().string();
      const auto a = csv::read_file(entry.path().string());
      const auto b = csv::read_file((dir / "bench_b" / name).string());
      ++files;
      if (name == "timings.csv") {
        // Wall-clock values differ; headers, methods and run counts must not.
        const auto la = csv::lines(a), lb = csv::lines(b);
        bool same = la.size() == lb.size();
        for (std::size_t i = 0; same && i < la.size(); ++i) {
          const auto fa = csv::split(la[i]), fb = csv::split(lb[i]);
          same = fa.size() == fb.size() && fa.front() == fb.front() && fa.back() == fb.back();
          if (i == 0) same = same && la[0] == lb[0];
        }
        if (!same) failed.push_back("timings.csv layout");
      } else if (a != b) {
        failed.push_back("bench file " + name);
      }
    }
    if (files < 5) failed.push_back("bench file count");
  }
  std::ostringstream os;
  os << "dataset, curve, trace, scalers and model round trips; bench regenerated twice with --jobs 1";
  for (const auto& f : failed) os << "; failed: " << f;
  return {failed.empty(), os.str()};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list{
      {"conservation and determinism", conservation},
      {"prior identity", prior_identity},
      {"gradient oracle", gradient_oracle},
      {"desk-scale recovery", recovery},
      {"ABC kernel and chain correctness", abc_correctness},
      {"speed ordering", speed},
      {"coverage property", coverage},
      {"consistency-penalty ablation", ablation},
      {"round trips", round_trips},
  };
  return list;
}

bool run_one(std::size_t k) {
  const auto& [name, fn] = criteria()[k];
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("[criterion %zu] %s: %s -- %s (%.1f s)\n", k + 1, o.pass ? "PASS" : "FAIL",
              name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <1-9|all>\n");
    return 2;
  }
  const std::string which = argv[1];
  bool ok = true;
  if (which == "all") {
    for (std::size_t k = 0; k < criteria().size(); ++k) ok = run_one(k) && ok;
  } else {
    const int k = std::atoi(which.c_str());
    if (k < 1 || k > static_cast<int>(criteria().size())) {
      std::fprintf(stderr, "unknown criterion %s\n", which.c_str());
      return 2;
    }
    ok = run_one(static_cast<std::size_t>(k - 1));
  }
  return ok ? 0 : 1;
}
