// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry points: normalize, train, eval, genscenario, simulate
// and serve. Data goes to files, human-readable summaries to stdout.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sentinel/dataset.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/mlp.hpp"
#include "sentinel/netbank.hpp"
#include "sentinel/scenario.hpp"
#include "sentinel/service.hpp"
#include "sentinel/simulator.hpp"

namespace fs = std::filesystem;
using namespace sentinel;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

// ---- normalize ---------------------------------------------------------

struct NormalizeArgs {
  std::string raw;
  std::string out;
  std::optional<std::size_t> sample;
  std::uint64_t seed = 0;
  std::size_t cap = kDefaultFactorialCap;
};

int run_normalize(const NormalizeArgs& a) {
  RawDataset raw = read_raw(fs::path(a.raw));
  PermutationPolicy policy = FullExpansion{};
  if (a.sample) policy = SampledPermutations{*a.sample, a.seed};
  NormalizedDataset ds = normalize(raw, policy, a.cap);
  write_normalized(ds, fs::path(a.out));
  std::cout << "normalized " << raw.total_records() << " records into " << ds.groups.size()
            << " groups, " << [&] {
                 std::size_t n = 0;
                 for (const auto& g : ds.groups) n += g.size();
                 return n;
               }()
            << " records (" << to_string(policy) << ")\n";
  return 0;
}

// ---- train -------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::size_t n = 0;
  std::size_t hidden = 0;
  double lr = TrainConfig{}.learning_rate;
  double momentum = TrainConfig{}.momentum;
  std::size_t patience = TrainConfig{}.patience;
  double min_improvement = TrainConfig{}.min_improvement;
  std::size_t max_epochs = TrainConfig{}.max_epochs;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::uint64_t> shuffle_seed;
  std::string out;
  std::string bank;
  std::string raw;
  std::string report;
};

void print_report(const TrainReport& r) {
  std::cout << "stopped after epoch " << r.stop_epoch << "; best epoch " << r.best_epoch
            << " with validation MSE " << r.best_validation_mse << '\n';
}

int run_train(const TrainArgs& a) {
  NormalizedDataset ds = read_normalized(fs::path(a.data));
  if (ds.n_objects != a.n) {
    throw InvalidArgument("--n " + std::to_string(a.n) + " does not match the dataset's N=" +
                          std::to_string(ds.n_objects));
  }
  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.momentum = a.momentum;
  tc.patience = a.patience;
  tc.min_improvement = a.min_improvement;
  tc.max_epochs = a.max_epochs;
  tc.shuffle_seed = a.shuffle_seed.value_or(a.seed);
  const std::uint64_t split_seed = a.split_seed.value_or(a.seed);

  Network net;
  TrainReport report;
  if (!a.bank.empty()) {
    // The bank keeps the raw data so later events can be appended to it.
    RawDataset raw = read_raw(fs::path(a.raw));
    if (dataset_id(raw) != ds.provenance.source_id) {
      throw InvalidArgument(a.raw + " is not the source of " + a.data);
    }
    TrainOptions options{a.hidden, a.seed, split_seed, ds.provenance.policy, tc};
    ModelRecord record = train_model(raw, options);
    auto bank = NetworkBank::load(a.bank);
    if (bank->contains(a.n)) record.version = bank->select(a.n)->version + 1;
    net = record.network;
    report.stop_epoch = record.provenance.stop_epoch;
    report.best_epoch = record.provenance.best_epoch;
    report.best_validation_mse = record.provenance.best_validation_mse;
    const std::uint64_t version = record.version;
    bank->publish(std::move(record), std::move(raw));
    std::cout << "published N=" << a.n << " v" << version << " to " << a.bank << '\n';
  } else {
    auto assignment = split(ds, split_seed);
    auto result = train_early_stop(init(NetworkConfig::for_objects(a.n, a.hidden), a.seed), ds, assignment, tc);
    net = std::move(result.network);
    report = std::move(result.report);
    if (!a.report.empty()) {
      auto out = open_out(a.report);
      write_report_csv(report, out);
    }
  }
  if (!a.out.empty()) {
    auto out = open_out(a.out);
    write_network(net, out);
  }
  print_report(report);
  return 0;
}

// ---- eval --------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
  std::string mode = "argmax";
  double threshold = kDefaultThreshold;
  std::string records = "all";
  std::optional<std::uint64_t> split_seed;
  std::string out_dir = ".";
  std::size_t bins = 20;
};

int run_eval(const EvalArgs& a) {
  std::ifstream in(a.model, std::ios::binary);
  if (!in) throw Error("cannot open " + a.model);
  // Bank records start with the plain model, so either file works.
  Network net = read_network(in, a.model, false);
  NormalizedDataset ds = read_normalized(fs::path(a.data));
  if (net.config.n_objects != ds.n_objects) {
    throw InvalidArgument("model serves N=" + std::to_string(net.config.n_objects) + " but the dataset has N=" +
                          std::to_string(ds.n_objects));
  }

  std::vector<Observation> records;
  if (a.records == "all") {
    for (const Observation* obs : flatten(ds)) records.push_back(*obs);
  } else {
    if (!a.split_seed) throw InvalidArgument("--records " + a.records + " needs --split-seed");
    const SplitTag tag = a.records == "train" ? SplitTag::train
                         : a.records == "validation" ? SplitTag::validation
                                                     : SplitTag::test;
    records = select_records(ds, split(ds, *a.split_seed), tag);
  }

  const ConfusionMode mode = a.mode == "argmax" ? ConfusionMode::argmax : ConfusionMode::threshold;
  Predictions p = evaluate(net, ds.meta, records);
  ConfusionMatrix cm = confusion(p, mode, a.threshold);
  ErrorHistogram hist = error_histogram(p, a.bins);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  open_out(dir / "confusion.txt") << format_table(cm);
  {
    auto out = open_out(dir / "confusion.csv");
    write_csv(cm, out);
  }
  open_out(dir / "histogram.txt") << format_table(hist);
  {
    auto out = open_out(dir / "histogram.csv");
    write_csv(hist, out);
  }
  std::cout << format_table(cm) << "accuracy " << cm.accuracy() << " over " << records.size() << " records\n";
  return 0;
}

// ---- genscenario -------------------------------------------------------

struct GenArgs {
  std::string spec;
  std::string scenario;
  std::string raw;
  std::optional<std::uint64_t> seed;
};

int run_genscenario(const GenArgs& a) {
  ScenarioSpec spec = read_scenario_spec(fs::path(a.spec));
  if (a.seed) spec.seed = *a.seed;
  GeneratedScenario g = generate_scenario(spec);
  write_scenario(g.scenario, fs::path(a.scenario));
  if (!a.raw.empty()) write_raw(g.dataset, fs::path(a.raw));
  std::cout << "scenario with " << g.scenario.n_objects << " objects, " << g.dataset.total_records()
            << " labelled records\n";
  return 0;
}

// ---- simulate ----------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string bank;
  bool headless = false;
  std::uint64_t ticks = 0;
  std::string out_dir = ".";
  double threshold = kDefaultThreshold;
  std::size_t window = kDefaultEventWindowTicks;
  std::string steer;
  bool learn = false;
  bool full_retrain = false;
};

// [{"tick": 3, "heading_degrees": 90, "speed": 5}, ...]
SteerScript read_steer_script(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  SteerScript script;
  try {
    for (const auto& item : nlohmann::json::parse(in)) {
      script[item.at("tick").get<std::uint64_t>()] =
          SteerCommand{item.at("heading_degrees").get<double>(), item.at("speed").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string(), 0, e.what());
  }
  return script;
}

void print_tick(const LogEntry& e) {
  std::cout << "tick " << e.tick << " v" << e.model_version << " alarms [";
  for (std::size_t i = 0; i < e.alarms.size(); ++i) std::cout << (i ? " " : "") << e.alarms[i];
  std::cout << "] hostility";
  for (double h : e.predictions) std::cout << ' ' << std::fixed << std::setprecision(2) << h;
  std::cout << std::defaultfloat << '\n';
}

int run_simulate(const SimulateArgs& a) {
  Scenario scenario = read_scenario(fs::path(a.scenario));
  auto bank = NetworkBank::load(a.bank);
  SimulationOptions options{a.threshold, a.window};
  std::optional<SteerScript> script;
  if (!a.steer.empty()) script = read_steer_script(a.steer);
  const SteerScript* script_ptr = script ? &*script : nullptr;

  if (!a.headless) {
    // Paced run: one line per tick at the scenario's tick interval.
    if (scenario.user_object() && !script_ptr) {
      throw InvalidArgument("scenario has a user-steered object; pass --steer or use `serve`");
    }
    std::signal(SIGINT, on_signal);
    EventLog log;
    WorldState state = initial_state(scenario, *bank, options);
    const auto period = std::chrono::duration<double>(scenario.tick_interval);
    auto next = std::chrono::steady_clock::now();
    for (std::uint64_t i = 0; (a.ticks == 0 || i < a.ticks) && !g_interrupted; ++i) {
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
      std::optional<SteerCommand> command;
      if (script_ptr) {
        if (auto it = script_ptr->find(state.tick + 1); it != script_ptr->end()) command = it->second;
      }
      state = step(state, scenario, *bank, command, log, options);
      print_tick(log.entries().back());
    }
    auto out = open_out(fs::path(a.out_dir) / "events.jsonl");
    log.write_jsonl(out);
    return 0;
  }

  HeadlessResult result = run_headless(scenario, *bank, a.ticks, options, script_ptr);
  write_headless_outputs(result, a.out_dir);
  std::size_t alarm_ticks = 0;
  for (const LogEntry& e : result.log.entries()) alarm_ticks += e.alarms.empty() ? 0 : 1;
  std::cout << "ran " << result.log.size() << " ticks, alarms on " << alarm_ticks << '\n';
  if (result.confusion) std::cout << format_table(*result.confusion);

  const auto missed = detect_missed_event(result.log, scenario, options);
  for (const MissedEvent& m : missed) {
    std::cout << "missed event: object " << m.object << " ticks " << m.first_tick << ".." << m.last_tick << '\n';
  }
  if (a.learn) {
    for (const MissedEvent& m : missed) {
      auto record = bank->retrain_from_event(scenario.n_objects, m.records, RetrainOptions{a.full_retrain});
      std::cout << "retrained N=" << scenario.n_objects << " -> v" << record->version << '\n';
    }
  }
  return 0;
}

// ---- serve -------------------------------------------------------------

struct ServeArgs {
  std::string scenario;
  std::string bank;
  std::string bind = "127.0.0.1:7878";
  std::optional<std::size_t> tick_ms;
  std::size_t queue = ServiceOptions{}.client_queue;
  double threshold = kDefaultThreshold;
  std::size_t window = kDefaultEventWindowTicks;
  bool no_auto_retrain = false;
  std::string log;
};

int run_serve(const ServeArgs& a) {
  Scenario scenario = read_scenario(fs::path(a.scenario));
  auto bank = NetworkBank::load(a.bank);
  ServiceOptions options;
  options.simulation = {a.threshold, a.window};
  options.client_queue = a.queue;
  options.auto_retrain = !a.no_auto_retrain;
  const auto period = a.tick_ms ? std::chrono::milliseconds(*a.tick_ms)
                                : std::chrono::milliseconds(static_cast<long>(scenario.tick_interval * 1000));

  ServiceCore core(scenario, *bank, options);
  TcpServer server(core, a.bind);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start(period);
  std::cout << "listening on port " << server.port() << std::endl;
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  core.wait_idle();
  if (!a.log.empty()) {
    auto out = open_out(a.log);
    core.log().write_jsonl(out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hostility prediction for tracked objects"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  NormalizeArgs norm;
  auto* c_norm = app.add_subcommand("normalize", "Expand a raw dataset over object permutations");
  c_norm->add_option("raw", norm.raw, "Raw dataset file")->required();
  c_norm->add_option("out", norm.out, "Normalized output file")->required();
  c_norm->add_option("--sample", norm.sample, "Sample this many permutations per record instead of all N!");
  c_norm->add_option("--seed", norm.seed, "Seed for --sample");
  c_norm->add_option("--cap", norm.cap, "Largest N allowed for full expansion")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a network with early stopping");
  c_train->add_option("normalized", train.data, "Normalized dataset file")->required();
  c_train->add_option("--n", train.n, "Object count")->required();
  c_train->add_option("--hidden", train.hidden, "Hidden units (default 2N)");
  c_train->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
  c_train->add_option("--momentum", train.momentum, "Momentum")->capture_default_str();
  c_train->add_option("--patience", train.patience, "Early-stopping patience")->capture_default_str();
  c_train->add_option("--min-improvement", train.min_improvement, "Relative validation gain that resets patience")
      ->capture_default_str();
  c_train->add_option("--max-epochs", train.max_epochs, "Epoch limit")->capture_default_str();
  c_train->add_option("--seed", train.seed, "Seed for initial weights and shuffling");
  c_train->add_option("--split-seed", train.split_seed, "Seed for the 70/20/10 split (default --seed)");
  c_train->add_option("--shuffle-seed", train.shuffle_seed, "Seed for the per-epoch record order (default --seed)");
  c_train->add_option("--out", train.out, "Write the trained model here");
  c_train->add_option("--report", train.report, "Write per-epoch errors as CSV");
  auto* bank_opt = c_train->add_option("--bank", train.bank, "Publish into this network bank");
  c_train->add_option("--raw", train.raw, "Raw source of the normalized file (with --bank)")->needs(bank_opt);
  bank_opt->excludes("--report");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Confusion matrix and error histogram");
  c_eval->add_option("model", eval.model, "Model or bank record file")->required();
  c_eval->add_option("normalized", eval.data, "Normalized dataset file")->required();
  c_eval->add_option("--mode", eval.mode, "argmax or threshold")
      ->check(CLI::IsMember({"argmax", "threshold"}))
      ->capture_default_str();
  c_eval->add_option("--threshold", eval.threshold, "Hostility threshold")->capture_default_str();
  c_eval->add_option("--records", eval.records, "all, train, validation or test")
      ->check(CLI::IsMember({"all", "train", "validation", "test"}))
      ->capture_default_str();
  c_eval->add_option("--split-seed", eval.split_seed, "Split seed used in training");
  c_eval->add_option("--bins", eval.bins, "Histogram bins")->capture_default_str();
  c_eval->add_option("--out-dir", eval.out_dir, "Directory for metric files")->capture_default_str();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("genscenario", "Generate a scenario and its labelled dataset");
  c_gen->add_option("spec", gen.spec, "Scenario spec (JSON)")->required();
  c_gen->add_option("--scenario", gen.scenario, "Scenario output file")->required();
  c_gen->add_option("--raw", gen.raw, "Raw dataset output file");
  c_gen->add_option("--seed", gen.seed, "Override the spec's seed");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a scenario against a network bank");
  c_sim->add_option("scenario", sim.scenario, "Scenario file")->required();
  c_sim->add_option("bank", sim.bank, "Network bank directory")->required();
  auto* headless = c_sim->add_flag("--headless", sim.headless, "Run as fast as possible and write metrics");
  c_sim->add_option("--ticks", sim.ticks, "Ticks to run (paced mode: 0 runs until interrupted)");
  c_sim->add_option("--out-dir", sim.out_dir, "Directory for the event log and metrics")->capture_default_str();
  c_sim->add_option("--threshold", sim.threshold, "Alarm threshold")->capture_default_str();
  c_sim->add_option("--window", sim.window, "Ticks of history kept per missed event")->capture_default_str();
  c_sim->add_option("--steer", sim.steer, "Steering script for the user object (JSON)");
  auto* learn = c_sim->add_flag("--learn", sim.learn, "Retrain on missed events and publish")->needs(headless);
  c_sim->add_flag("--full-retrain", sim.full_retrain, "Retrain from fresh weights instead of warm start")
      ->needs(learn);

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Stream the simulation over TCP");
  c_serve->add_option("scenario", serve.scenario, "Scenario file")->required();
  c_serve->add_option("bank", serve.bank, "Network bank directory")->required();
  c_serve->add_option("--bind", serve.bind, "host:port (port 0 picks one)")->capture_default_str();
  c_serve->add_option("--tick-ms", serve.tick_ms, "Wall-clock tick period (default: the scenario's interval)");
  c_serve->add_option("--queue", serve.queue, "Messages buffered per client")->capture_default_str();
  c_serve->add_option("--threshold", serve.threshold, "Alarm threshold")->capture_default_str();
  c_serve->add_option("--window", serve.window, "Ticks of history kept per missed event")->capture_default_str();
  c_serve->add_flag("--no-auto-retrain", serve.no_auto_retrain, "Only retrain on operator marks");
  c_serve->add_option("--log", serve.log, "Write the event log here on shutdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*c_norm) return run_normalize(norm);
    if (*c_train) return run_train(train);
    if (*c_eval) return run_eval(eval);
    if (*c_gen) return run_genscenario(gen);
    if (*c_sim) return run_simulate(sim);
    if (*c_serve) return run_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "sentinel: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
