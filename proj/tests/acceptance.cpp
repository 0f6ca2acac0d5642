// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "sentinel/dataset.hpp"
#include "sentinel/evaluation.hpp"
#include "sentinel/mlp.hpp"
#include "sentinel/netbank.hpp"
#include "sentinel/scenario.hpp"
#include "sentinel/simulator.hpp"

using namespace sentinel;
using sentinel::testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-22s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::size_t factorial(std::size_t n) { return n <= 1 ? 1 : n * factorial(n - 1); }

// Training configuration shared by the desk-scale runs.
TrainOptions desk_options() {
  TrainOptions o;
  o.init_seed = 4;
  o.split_seed = 2;
  o.train_config.learning_rate = 0.3;
  o.train_config.min_improvement = 0.01;
  o.train_config.shuffle_seed = 3;
  return o;
}

ScenarioSpec desk_spec() {
  ScenarioSpec spec;  // N = 5, five trained patterns
  spec.total_records = 494;
  spec.seed = 1;
  return spec;
}

// ---------------------------------------------------------------------------

Outcome count_and_closure() {
  Rng rng(20260101);
  std::size_t datasets = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 5);
    RawDataset raw = sentinel::testing::random_raw(rng, n, 3, 6);
    NormalizedDataset norm = normalize(raw, FullExpansion{});
    if (norm.groups.size() != raw.groups.size()) return {false, "group count changed"};
    for (std::size_t k = 0; k < raw.groups.size(); ++k) {
      if (norm.groups[k].size() != raw.groups[k].size() * factorial(n)) {
        return {false, "size mismatch in dataset " + std::to_string(i)};
      }
      // Closure: any simultaneous permutation maps the group onto itself.
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span<std::size_t>(perm));
      Group moved;
      for (const Observation& obs : norm.groups[k]) moved.push_back(permute(obs, perm));
      if (sentinel::testing::sorted_keys(moved) != sentinel::testing::sorted_keys(norm.groups[k])) {
        return {false, "not closed in dataset " + std::to_string(i)};
      }
      // Every raw record appears unchanged.
      auto keys = sentinel::testing::sorted_keys(norm.groups[k]);
      for (const Observation& obs : raw.groups[k]) {
        if (!std::binary_search(keys.begin(), keys.end(), sentinel::testing::flat_key(obs))) {
          return {false, "raw record missing in dataset " + std::to_string(i)};
        }
      }
    }
    ++datasets;
  }
  return {true, std::to_string(datasets) + " datasets, sizes == M*N! and closed"};
}

Outcome gradient_oracle() {
  constexpr double eps = 1e-5;
  Rng rng(77);
  double worst = 0.0;
  std::size_t params = 0;
  const int triples = 120;
  for (int t = 0; t < triples; ++t) {
    const std::size_t n = 1 + rng.below(5);
    Network net = init(NetworkConfig::for_objects(n), 1000 + static_cast<std::uint64_t>(t));
    // Spread the weights beyond the init range so saturation is exercised.
    for (double& w : net.hidden_weights.data) w *= 1.0 + 2.0 * rng.uniform();
    for (double& b : net.hidden_bias) b = rng.uniform(-1, 1);
    for (double& b : net.output_bias) b = rng.uniform(-1, 1);
    std::vector<double> x(2 * n), y(n);
    for (double& v : x) v = rng.uniform();
    for (double& v : y) v = static_cast<double>(rng.below(2));

    const Gradients g = gradients(net, x, y);
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + eps;
      const double up = record_loss(net, x, y);
      param = saved - eps;
      const double down = record_loss(net, x, y);
      param = saved;
      const double numeric = (up - down) / (2 * eps);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
      ++params;
    };
    for (std::size_t i = 0; i < net.hidden_weights.data.size(); ++i) check(net.hidden_weights.data[i], g.hidden_weights.data[i]);
    for (std::size_t i = 0; i < net.hidden_bias.size(); ++i) check(net.hidden_bias[i], g.hidden_bias[i]);
    for (std::size_t i = 0; i < net.output_weights.data.size(); ++i) check(net.output_weights.data[i], g.output_weights.data[i]);
    for (std::size_t i = 0; i < net.output_bias.size(); ++i) check(net.output_bias[i], g.output_bias[i]);
  }
  return {worst < 1e-5, fmt("%.0f triples, %.0f parameters, max relative error %.2e (limit 1e-5)", triples,
                            static_cast<double>(params), worst)};
}

// The desk-scale run feeds three criteria.
struct DeskRun {
  NormalizedDataset norm;
  SplitAssignment split;
  TrainResult trained;
  std::vector<Observation> test;
};

DeskRun& desk_run() {
  static DeskRun run = [] {
    DeskRun r;
    const TrainOptions o = desk_options();
    GeneratedScenario g = generate_scenario(desk_spec());
    r.norm = normalize(g.dataset, FullExpansion{});
    r.split = split(r.norm, o.split_seed);
    Network net = init(NetworkConfig::for_objects(5), o.init_seed);
    r.trained = train_early_stop(std::move(net), r.norm, r.split, o.train_config);
    r.test = select_records(r.norm, r.split, SplitTag::test);
    return r;
  }();
  return run;
}

Outcome desk_confusion() {
  DeskRun& r = desk_run();
  const std::size_t total = r.norm.total_records();
  const std::size_t test = r.split.count(SplitTag::test);
  ConfusionMatrix cm = confusion(r.trained.network, r.norm.meta, r.test, ConfusionMode::argmax);
  std::string cols;
  for (std::size_t c = 0; c < 5; ++c) cols += (c ? "+" : "") + std::to_string(cm.column_total(c));
  const bool ok = total == 59280 && test == 5928 && cm.accuracy() >= 0.99;
  return {ok, "records " + std::to_string(total) + ", test " + std::to_string(test) + " (" + cols + ")" +
                  fmt(", diagonal accuracy %.4f (need >= 0.99)", cm.accuracy())};
}

Outcome training_dynamics() {
  DeskRun& r = desk_run();
  const TrainReport& rep = r.trained.report;
  ErrorHistogram h = error_histogram(r.trained.network, r.norm.meta, r.test);
  const std::size_t mode = h.modal_bin();
  const bool ok = rep.best_validation_mse <= 1e-2 && rep.best_epoch <= 200 && h.edges[mode] >= 0.0 &&
                  h.edges[mode + 1] <= 0.05 + 1e-12;
  return {ok, fmt("best validation MSE %.2e (<= 1e-2), best epoch %.0f (<= 200), stop %.0f, ", rep.best_validation_mse,
                  static_cast<double>(rep.best_epoch), static_cast<double>(rep.stop_epoch)) +
                  fmt("modal bin [%.2f, %.2f) (within [0, 0.05])", h.edges[mode], h.edges[mode + 1])};
}

Outcome equivariance() {
  DeskRun& r = desk_run();
  Rng rng(31);
  const std::size_t samples = 500;
  double sum = 0.0, worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const Observation& obs = r.test[rng.below(r.test.size())];
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    const Observation moved = permute(obs, perm);  // slot i holds object perm[i]
    const auto base = predict(r.trained.network, r.norm.meta, obs.locations);
    const auto out = predict(r.trained.network, r.norm.meta, moved.locations);
    double m = 0.0;
    for (std::size_t i = 0; i < 5; ++i) m = std::max(m, std::abs(out[i] - base[perm[i]]));
    sum += m;
    worst = std::max(worst, m);
  }
  const double mean = sum / static_cast<double>(samples);
  return {mean <= 0.1, fmt("mean max deviation %.2e over 500 inputs (<= 0.1), worst %.2e", mean, worst)};
}

// Runs the novel attack headless, retrains on what was missed, replays.
struct OnlineResult {
  std::size_t missed = 0;
  bool labels_ok = false;
  std::uint64_t version = 0;
  std::size_t hits = 0;
  std::size_t window_ticks = 0;
  std::size_t false_alarms = 0;
  std::string replay_log;
};

OnlineResult online_once() {
  OnlineResult out;
  ScenarioSpec base = desk_spec();
  base.benign_records = 250;
  GeneratedScenario g = generate_scenario(base);
  NetworkBank bank;
  bank.publish(train_model(g.dataset, desk_options()), g.dataset);

  ScenarioSpec novel;
  novel.patterns = {AttackPattern::coastal_creep};
  novel.n_patterns = 1;
  novel.records_per_pattern = 40;
  novel.seed = 8;
  GeneratedScenario ns = generate_scenario(novel);
  const std::uint64_t ticks = ns.dataset.total_records() + 2 * novel.gap_ticks + 5;

  HeadlessResult first = run_headless(ns.scenario, bank, ticks);
  auto missed = detect_missed_event(first.log, ns.scenario);
  out.missed = missed.size();
  if (missed.empty()) return out;
  const MissedEvent& ev = missed.front();
  out.labels_ok = !ev.records.empty();
  for (const Observation& obs : ev.records) {
    for (std::size_t v = 0; v < obs.size(); ++v) {
      if (obs.hostility[v] != (v + 1 == ev.object ? 1.0 : 0.0)) out.labels_ok = false;
    }
  }

  out.version = bank.retrain_from_event(5, ev.records)->version;
  HeadlessResult replay = run_headless(ns.scenario, bank, ticks);
  for (const LogEntry& e : replay.log.entries()) {
    const bool attacking = ns.scenario.hostile_at(ev.object - 1, ns.scenario.time_of(e.tick));
    if (attacking) ++out.window_ticks;
    for (std::size_t a : e.alarms) {
      if (a == ev.object && attacking) ++out.hits;
      if (!ns.scenario.hostile_at(a - 1, ns.scenario.time_of(e.tick))) ++out.false_alarms;
    }
  }
  std::ostringstream s;
  replay.log.write_jsonl(s);
  out.replay_log = s.str();
  return out;
}

Outcome online_learning() {
  OnlineResult a = online_once();
  if (a.missed == 0) return {false, "novel attack was detected before retraining; no missed window"};
  OnlineResult b = online_once();
  const bool deterministic = a.replay_log == b.replay_log && a.hits == b.hits;
  const bool ok = a.labels_ok && a.version == 2 && a.hits > 0 && deterministic;
  return {ok, "missed windows " + std::to_string(a.missed) + (a.labels_ok ? " (labels 1/0 ok)" : " (bad labels)") +
                  ", retrained to v" + std::to_string(a.version) + ", replay alarms on attacker " +
                  std::to_string(a.hits) + "/" + std::to_string(a.window_ticks) + " ticks, false alarms " +
                  std::to_string(a.false_alarms) + (deterministic ? ", rerun identical" : ", rerun DIFFERS")};
}

// Every stage writes files into `dir`; two runs must agree byte for byte.
void pipeline(const std::filesystem::path& dir) {
  ScenarioSpec spec;
  spec.n_objects = 4;
  spec.n_patterns = 4;
  spec.records_per_pattern = 20;
  spec.benign_records = 30;
  spec.seed = 12;
  GeneratedScenario g = generate_scenario(spec);
  write_scenario(g.scenario, dir / "scenario.json");
  write_raw(g.dataset, dir / "raw.txt");

  RawDataset raw = read_raw(dir / "raw.txt");
  NormalizedDataset norm = normalize(raw, FullExpansion{});
  write_normalized(norm, dir / "normalized.txt");
  write_normalized(normalize(raw, SampledPermutations{6, 9}), dir / "sampled.txt");

  TrainOptions o = desk_options();
  o.train_config.max_epochs = 40;
  SplitAssignment sp = split(norm, o.split_seed);
  TrainResult tr = train_early_stop(init(NetworkConfig::for_objects(4), o.init_seed), norm, sp, o.train_config);
  write_network(tr.network, dir / "model.txt");
  {
    std::ofstream rep(dir / "report.csv");
    write_report_csv(tr.report, rep);
  }
  auto test = select_records(norm, sp, SplitTag::test);
  {
    std::ofstream c(dir / "eval_confusion.csv");
    write_csv(confusion(tr.network, norm.meta, test, ConfusionMode::threshold), c);
    std::ofstream h(dir / "eval_histogram.csv");
    write_csv(error_histogram(tr.network, norm.meta, test), h);
  }

  {
    NetworkBank bank(dir / "bank");
    bank.publish(train_model(raw, o), raw);
  }
  auto bank = NetworkBank::load(dir / "bank");
  HeadlessResult run = run_headless(g.scenario, *bank, 60);
  std::filesystem::create_directories(dir / "run");
  write_headless_outputs(run, dir / "run");
  auto recs = window_records(run.log, 1, 10, 25);
  bank->retrain_from_event(4, recs);
}

std::map<std::string, std::string> snapshot_files(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[std::filesystem::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

Outcome determinism() {
  TempDir a("accept-a"), b("accept-b");
  pipeline(a.path());
  pipeline(b.path());
  auto fa = snapshot_files(a.path());
  auto fb = snapshot_files(b.path());
  if (fa.size() != fb.size()) return {false, "file sets differ"};
  for (const auto& [name, bytes] : fa) {
    auto it = fb.find(name);
    if (it == fb.end()) return {false, name + " missing from second run"};
    if (it->second != bytes) return {false, name + " differs"};
  }
  return {true, std::to_string(fa.size()) + " files byte-identical across two runs"};
}

}  // namespace

int main() {
  report("count-and-closure", count_and_closure);
  report("gradient-oracle", gradient_oracle);
  report("confusion-diagonal", desk_confusion);
  report("training-dynamics", training_dynamics);
  report("equivariance", equivariance);
  report("online-learning", online_learning);
  report("determinism", determinism);
  std::printf("%s: %d failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
