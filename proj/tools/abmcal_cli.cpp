// Command-line front end: simulate, gen-data, train, calibrate, bench.
//
// stdout carries primary results only; logs go to stderr. On failure a
// single line `error code=<n> kind=<kind> message="..."` is written to
// stderr and the process exits with <n>.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "abmcal/abc.hpp"
#include "abmcal/abm.hpp"
#include "abmcal/benchmark.hpp"
#include "abmcal/calibrator.hpp"
#include "abmcal/csv.hpp"
#include "abmcal/errors.hpp"
#include "abmcal/scalers.hpp"
#include "abmcal/scenario.hpp"

namespace {

using namespace abmcal;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kInvalidValue = 3,
  kIoFailure = 4,
  kSchema = 5,
  kNumerical = 6,
};

int report_error(int code, const std::string& kind, const std::string& message) {
  std::cerr << "error code=" << code << " kind=" << kind
            << " message=" << json(message).dump() << '\n';
  return code;
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw std::invalid_argument(std::string("missing --") + what);
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError(std::string(what) + " file not found: '" + path + "'");
  }
}

void require_output(const std::string& path) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("output directory does not exist: '" + parent.string() + "'");
  }
}

// Flat JSON config: keys are long option names. Values apply only to options
// not given on the command line.
void apply_config(const std::string& path, std::vector<CLI::App*> apps) {
  if (path.empty()) return;
  require_input(path, "config");
  json j;
  try {
    j = json::parse(csv::read_file(path));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config file must be a flat JSON object");
  for (CLI::App* app : apps) {
    for (CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || opt->count() > 0) continue;
      const auto& key = opt->get_lnames().front();
      if (!j.contains(key)) continue;
      const auto& v = j.at(key);
      std::string text;
      if (v.is_string()) {
        text = v.get<std::string>();
      } else if (v.is_boolean()) {
        text = v.get<bool>() ? "true" : "false";
      } else if (v.is_number() || v.is_array()) {
        text = v.is_array() ? "" : v.dump();
        if (v.is_array()) {
          for (std::size_t k = 0; k < v.size(); ++k) {
            text += (k ? "," : "") + (v[k].is_string() ? v[k].get<std::string>() : v[k].dump());
          }
        }
      } else {
        throw SchemaError("config key '" + key + "' has an unsupported type");
      }
      opt->add_result(text);
      opt->run_callback();
    }
  }
}

struct Common {
  std::uint64_t seed = 1;
  int jobs = 0;
  std::string config;
};

struct SimulateArgs {
  int n = 5000;
  int i0 = 100;
  double c_rate = 10.0;
  double p_tran = 0.02;
  double p_recov = 0.1;
  int days = 60;
  std::string out;
};

struct GenDataArgs {
  int count = 20000;
  int days = 60;
  std::string out = "dataset.csv";
  std::string scalers = "scalers.json";
};

struct TrainArgs {
  std::string data;
  std::string scalers;
  std::string out = "model.json";
  std::string log;
  TrainConfig train;
  LossConfig loss;
  std::vector<double> loss_weights{1.0, 1.0, 1.0};
};

struct AbcArgs {
  int iterations = 2000;
  int burn_in = 1000;
  double proposal_sd = 0.1;
  double kernel_factor = 0.05;
  std::string seeding = "chain";
  double init_crate = 10.0;
  double init_precov = 0.1605;
  double init_ptran = 0.05;
};

struct CalibrateArgs {
  std::string method;
  std::string curve;
  std::string model;
  int n = 0;
  int i0 = 0;
  double p_recov = 0.0;
  std::string trace;
};

struct BenchArgs {
  int scenarios = 100;
  bool full = false;
  std::vector<std::string> methods{"ml", "abc"};
  std::string model;
  std::string out = "bench_out";
  int reps = 100;
  int days = 60;
  bool median_predictor = false;
  int train_scenarios = 2000;
};

void add_train_options(CLI::App* cmd, TrainArgs& t) {
  auto& c = t.train;
  cmd->add_option("--epochs", c.max_epochs, "Maximum training epochs (published setting)")
      ->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "Mini-batch size (published setting)")
      ->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate (published tuned value)")
      ->capture_default_str();
  cmd->add_option("--dropout", c.dropout,
                  "Dropout between LSTM layers (published tuned value)")
      ->capture_default_str();
  cmd->add_option("--patience", c.patience, "Early-stopping patience in epochs (toolkit choice)")
      ->capture_default_str();
  cmd->add_option("--val-frac", c.validation_fraction,
                  "Validation fraction of the training data (toolkit choice)")
      ->capture_default_str();
  cmd->add_option("--hidden", c.network.hidden_size,
                  "Hidden units per LSTM direction (published setting)")
      ->capture_default_str();
  cmd->add_option("--layers", c.network.num_layers,
                  "Stacked bidirectional LSTM layers (published setting)")
      ->capture_default_str();
  cmd->add_option("--dense", c.network.dense_units, "ReLU dense units (published setting)")
      ->capture_default_str();
  cmd->add_option("--lambda", t.loss.lambda,
                  "Consistency penalty weight; 0 disables it (toolkit choice)")
      ->capture_default_str();
  cmd->add_option("--loss-weights", t.loss_weights,
                  "Per-target squared-error weights p_tran,c_rate,R0 (default literal loss)")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
}

void add_abc_options(CLI::App* cmd, AbcArgs& a) {
  cmd->add_option("--iterations", a.iterations, "LFMCMC iterations (published setting)")
      ->capture_default_str();
  cmd->add_option("--burn-in", a.burn_in, "Discarded burn-in samples (published setting)")
      ->capture_default_str();
  cmd->add_option("--proposal-sd", a.proposal_sd,
                  "Std. dev. of log/logit proposal steps (published setting)")
      ->capture_default_str();
  cmd->add_option("--kernel-factor", a.kernel_factor,
                  "Kernel scale as a fraction of ||S_obs||_2 (published setting)")
      ->capture_default_str();
  cmd->add_option("--seeding", a.seeding,
                  "Simulation seeding per chain (common random numbers) or per iteration "
                  "(toolkit choice)")
      ->check(CLI::IsMember({"chain", "iteration"}))
      ->capture_default_str();
  cmd->add_option("--init-crate", a.init_crate, "Initial contact rate (prior midpoint)")
      ->capture_default_str();
  cmd->add_option("--init-precov", a.init_precov, "Initial recovery rate (prior midpoint)")
      ->capture_default_str();
  cmd->add_option("--init-ptran", a.init_ptran, "Initial transmission probability")
      ->capture_default_str();
}

abc::AbcConfig abc_config(const AbcArgs& a, std::uint64_t seed) {
  abc::AbcConfig cfg;
  cfg.iterations = a.iterations;
  cfg.burn_in = a.burn_in;
  cfg.proposal_sd = a.proposal_sd;
  cfg.kernel_factor = a.kernel_factor;
  cfg.seeding = a.seeding == "chain" ? abc::SimulationSeeding::kPerChain
                                     : abc::SimulationSeeding::kPerIteration;
  cfg.initial = {a.init_crate, a.init_precov, a.init_ptran};
  cfg.seed = seed;
  return cfg;
}

void log_epoch(const EpochRecord& r) {
  std::cerr << "epoch " << r.epoch << " train_loss=" << r.train_loss
            << " val_loss=" << r.val_loss << " (" << r.seconds << " s)\n";
}

TrainedModel train_from(const std::vector<Scenario>& all, TrainArgs& args,
                        const Scalers* given_scalers, std::uint64_t seed) {
  if (args.loss_weights.size() != 3) throw std::invalid_argument("--loss-weights needs 3 values");
  args.loss.weights = {args.loss_weights[0], args.loss_weights[1], args.loss_weights[2]};
  args.train.seed = seed;
  args.train.validate();
  const auto split = split_dataset(all, args.train.validation_fraction, child_seed(seed, 7));
  const Scalers scalers = given_scalers != nullptr ? *given_scalers : fit_scalers(split.train);
  std::cerr << "training on " << split.train.size() << " scenarios, validating on "
            << split.validation.size() << '\n';
  return train(split.train, split.validation, scalers, args.train, args.loss, log_epoch);
}

json theta_json(const std::string& method, const Theta& t) {
  return {{"method", method}, {"p_tran", t.p_tran}, {"c_rate", t.c_rate}, {"r0", t.r0}};
}

int run(int argc, char** argv) {
  CLI::App app{"Agent-based SIR calibration toolkit: BiLSTM inverse mapping and ABC-LFMCMC"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--jobs", common.jobs,
                 "Worker threads (0 = all cores; 1 = deterministic single-thread mode)")
      ->capture_default_str();
  app.add_option("--config", common.config,
                 "Flat JSON file of option defaults (command-line flags take precedence)");

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate one incidence curve to CSV");
  simulate_cmd->add_option("--n", sim.n, "Population size")->capture_default_str();
  simulate_cmd->add_option("--i0", sim.i0, "Initially infected agents")->capture_default_str();
  simulate_cmd->add_option("--crate", sim.c_rate, "Contacts per infectious agent per day")
      ->capture_default_str();
  simulate_cmd->add_option("--ptran", sim.p_tran, "Per-contact transmission probability")
      ->capture_default_str();
  simulate_cmd->add_option("--precov", sim.p_recov, "Daily recovery probability")
      ->capture_default_str();
  simulate_cmd->add_option("--days", sim.days, "Horizon in days (published setting)")
      ->capture_default_str();
  simulate_cmd->add_option("--out", sim.out, "Output CSV (default: stdout)");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a labeled dataset and its scalers");
  gen_cmd->add_option("--count", gen.count, "Number of scenarios (toolkit choice)")
      ->capture_default_str();
  gen_cmd->add_option("--days", gen.days, "Horizon in days (published setting)")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Dataset CSV")->capture_default_str();
  gen_cmd->add_option("--scalers", gen.scalers, "Scalers JSON")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the BiLSTM calibrator on a dataset CSV");
  train_cmd->add_option("--data", tr.data, "Dataset CSV from gen-data")->required();
  train_cmd->add_option("--scalers", tr.scalers,
                        "Scalers JSON (default: fit on the training split)");
  train_cmd->add_option("--out", tr.out, "Model JSON")->capture_default_str();
  train_cmd->add_option("--log", tr.log, "Training log CSV");
  add_train_options(train_cmd, tr);

  CalibrateArgs cal;
  AbcArgs cal_abc;
  auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate one observed curve (ml or abc)");
  cal_cmd->add_option("method", cal.method, "ml or abc")
      ->required()
      ->check(CLI::IsMember({"ml", "abc"}));
  cal_cmd->add_option("--curve", cal.curve, "Observed curve CSV (day,incidence)")->required();
  cal_cmd->add_option("--model", cal.model, "Model JSON (ml)");
  cal_cmd->add_option("--n", cal.n, "Population size")->required();
  cal_cmd->add_option("--precov", cal.p_recov, "Known recovery rate (ml)");
  cal_cmd->add_option("--i0", cal.i0, "Seed cases (abc; default: day-0 incidence)");
  cal_cmd->add_option("--trace", cal.trace, "Write the ABC trace CSV here");
  add_abc_options(cal_cmd, cal_abc);

  BenchArgs b;
  AbcArgs bench_abc;
  TrainArgs bench_train;
  auto* bench_cmd = app.add_subcommand("bench", "Run the ABC vs BiLSTM comparison study");
  bench_cmd->add_option("--scenarios", b.scenarios, "Test scenarios (desk-scale default)")
      ->capture_default_str();
  bench_cmd->add_flag("--full", b.full, "Use 1000 test scenarios (published study size)");
  bench_cmd->add_option("--methods", b.methods, "Comma-separated subset of ml,abc")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--model", b.model,
                        "Model JSON for ml (default: train one in-process on fresh data)");
  bench_cmd->add_option("--out", b.out, "Report directory")->capture_default_str();
  bench_cmd->add_option("--reps", b.reps, "Forward simulations per calibration (published setting)")
      ->capture_default_str();
  bench_cmd->add_option("--days", b.days, "Horizon in days (published setting)")
      ->capture_default_str();
  bench_cmd->add_flag("--median-predictor", b.median_predictor,
                      "Use the pointwise median instead of the mean of forward simulations");
  bench_cmd->add_option("--train-scenarios", b.train_scenarios,
                        "Training scenarios when no --model is given")
      ->capture_default_str();
  add_abc_options(bench_cmd, bench_abc);
  add_train_options(bench_cmd, bench_train);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(kUsage, "usage", e.what());
  }

  CLI::App* active = app.get_subcommands().front();
  apply_config(common.config, {&app, active});
  const int jobs = common.jobs;

  if (active == simulate_cmd) {
    require_output(sim.out);
    EpiParams p;
    p.n = sim.n;
    p.i0 = sim.i0;
    p.c_rate = sim.c_rate;
    p.p_tran = sim.p_tran;
    p.p_recov = sim.p_recov;
    p.r0 = p.p_tran * p.c_rate / p.p_recov;
    const auto curve = simulate(p, sim.days, common.seed);
    if (sim.out.empty()) {
      std::cout << curve_to_csv(curve);
    } else {
      write_curve(sim.out, curve);
    }
    return kOk;
  }

  if (active == gen_cmd) {
    require_output(gen.out);
    require_output(gen.scalers);
    const auto data = generate_dataset(gen.count, gen.days, PriorConfig{}, common.seed, jobs);
    write_dataset(gen.out, data);
    csv::write_file(gen.scalers, scalers_to_json(fit_scalers(data)));
    std::cerr << "wrote " << data.size() << " scenarios to " << gen.out << '\n';
    return kOk;
  }

  if (active == train_cmd) {
    require_input(tr.data, "data");
    if (!tr.scalers.empty()) require_input(tr.scalers, "scalers");
    require_output(tr.out);
    require_output(tr.log);
    const auto data = read_dataset(tr.data);
    Scalers given;
    if (!tr.scalers.empty()) given = scalers_from_json(csv::read_file(tr.scalers));
    const auto model = train_from(data, tr, tr.scalers.empty() ? nullptr : &given, common.seed);
    save_model(model, tr.out);
    if (!tr.log.empty()) csv::write_file(tr.log, training_log_csv(model.metadata));
    std::cerr << "best epoch " << model.metadata.best_epoch
              << " val_loss=" << model.metadata.best_val_loss << '\n';
    return kOk;
  }

  if (active == cal_cmd) {
    require_input(cal.curve, "curve");
    require_output(cal.trace);
    const auto curve = read_curve(cal.curve);
    if (cal.method == "ml") {
      require_input(cal.model, "model");
      if (!(cal.p_recov > 0.0 && cal.p_recov <= 1.0)) {
        throw std::invalid_argument("--precov must lie in (0, 1]");
      }
      const auto model = load_model(cal.model);
      const auto pred = predict(model, {curve, cal.n, cal.p_recov});
      std::cerr << "inference took " << pred.seconds << " s\n";
      std::cout << theta_json("ml", pred.theta).dump(2) << '\n';
      return kOk;
    }
    auto cfg = abc_config(cal_abc, common.seed);
    cfg.n = cal.n;
    cfg.i0 = cal.i0 > 0 ? cal.i0 : curve.incidence.front();
    const auto started = std::chrono::steady_clock::now();
    const auto trace = abc::run_lfmcmc(curve, cfg);
    const auto est = abc::point_estimate(trace, cfg);
    std::cerr << "abc chain took "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
              << " s\n";
    if (!cal.trace.empty()) csv::write_file(cal.trace, abc::trace_to_csv(trace));
    json out = theta_json("abc", {est.p_tran, est.c_rate, est.r0});
    out["p_recov"] = est.p_recov;
    out["acceptance_rate"] = trace.acceptance_rate();
    std::cout << out.dump(2) << '\n';
    return kOk;
  }

  // bench
  if (b.full) b.scenarios = 1000;
  bench::BenchConfig cfg;
  cfg.scenarios = b.scenarios;
  cfg.methods.clear();
  for (const auto& m : b.methods) cfg.methods.push_back(bench::parse_method(m));
  cfg.abc = abc_config(bench_abc, common.seed);
  cfg.predictive.reps = b.reps;
  cfg.predictive.horizon = b.days;
  cfg.predictive.use_median = b.median_predictor;
  cfg.seed = common.seed;
  cfg.jobs = jobs;
  if (!b.model.empty()) require_input(b.model, "model");
  const bool wants_ml =
      std::find(cfg.methods.begin(), cfg.methods.end(), bench::Method::kMl) != cfg.methods.end();

  json manifest;
  manifest["tool"] = "abmcal";
  manifest["version"] = kVersion;
  manifest["seed"] = common.seed;
  manifest["scenarios"] = cfg.scenarios;
  manifest["methods"] = b.methods;
  manifest["reps"] = b.reps;
  manifest["days"] = b.days;
  manifest["median_predictor"] = b.median_predictor;
  manifest["abc"] = {{"iterations", cfg.abc.iterations},
                     {"burn_in", cfg.abc.burn_in},
                     {"proposal_sd", cfg.abc.proposal_sd},
                     {"kernel_factor", cfg.abc.kernel_factor},
                     {"seeding", bench_abc.seeding},
                     {"initial", {cfg.abc.initial.c_rate, cfg.abc.initial.p_recov,
                                  cfg.abc.initial.p_tran}}};

  TrainedModel model;
  if (wants_ml) {
    if (!b.model.empty()) {
      model = load_model(b.model);
      manifest["model"] = {{"path", b.model}};
    } else {
      const auto train_seed = child_seed(common.seed, 1000);
      std::cerr << "no --model given; training on " << b.train_scenarios << " fresh scenarios\n";
      const auto data =
          generate_dataset(b.train_scenarios, b.days, PriorConfig{}, train_seed, jobs);
      model = train_from(data, bench_train, nullptr, train_seed);
      save_model(model, (std::filesystem::path(b.out) / "model.json").string());
      const auto& t = bench_train.train;
      manifest["model"] = {{"trained_in_process", true},
                           {"train_scenarios", b.train_scenarios},
                           {"seed", train_seed},
                           {"hidden", t.network.hidden_size},
                           {"layers", t.network.num_layers},
                           {"dense", t.network.dense_units},
                           {"epochs", t.max_epochs},
                           {"batch", t.batch_size},
                           {"lr", t.learning_rate},
                           {"dropout", t.dropout},
                           {"patience", t.patience},
                           {"lambda", bench_train.loss.lambda},
                           {"best_epoch", model.metadata.best_epoch}};
    }
  }
  std::filesystem::create_directories(b.out);
  const auto report = bench::run_benchmark(cfg, wants_ml ? &model : nullptr);
  bench::emit_report(report, b.out, manifest.dump(2) + "\n");
  for (const auto& t : report.timings) {
    std::cerr << t.method << ": mean " << t.mean_seconds << " s per calibration over " << t.runs
              << " runs\n";
  }
  std::cout << b.out << '\n';
  return report.failures.empty() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const abmcal::IoError& e) {
    return report_error(kIoFailure, "io", e.what());
  } catch (const abmcal::SchemaError& e) {
    return report_error(kSchema, "schema", e.what());
  } catch (const abmcal::NumericalError& e) {
    return report_error(kNumerical, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return report_error(kInvalidValue, "invalid_value", e.what());
  } catch (const std::exception& e) {
    return report_error(kFailure, "failure", e.what());
  }
}
