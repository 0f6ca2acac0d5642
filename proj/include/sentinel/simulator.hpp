// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/evaluation.hpp"
#include "sentinel/netbank.hpp"
#include "sentinel/scenario.hpp"

namespace sentinel {

inline constexpr std::size_t kDefaultEventWindowTicks = 30;

/// Heading in degrees (0 = east, counterclockwise) and speed in area units
/// per simulated second for the user-steered object.
struct SteerCommand {
  double heading_degrees = 0.0;
  double speed = 0.0;

  friend bool operator==(const SteerCommand&, const SteerCommand&) = default;
};

struct WorldState {
  std::uint64_t tick = 0;
  std::vector<Location> positions;
  std::vector<double> last_prediction;
  /// 1-based indices of objects whose prediction meets the threshold, ascending.
  std::vector<std::size_t> alarms;
  std::uint64_t model_version = 0;
  /// Standing command for the user-steered object.
  SteerCommand steering;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// One simulated tick as seen by the operator.
struct LogEntry {
  std::uint64_t tick = 0;
  std::vector<Location> positions;
  std::vector<double> predictions;
  std::vector<std::size_t> alarms;
  std::optional<SteerCommand> command;
  /// 1-based indices of objects inside a ground-truth hostile window.
  std::vector<std::size_t> hostile;
  std::uint64_t model_version = 0;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

/// Append-only tick log; ticks strictly increase.
class EventLog {
 public:
  void append(LogEntry entry);
  const std::vector<LogEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  /// One JSON object per line.
  void write_jsonl(std::ostream& out) const;
  static EventLog read_jsonl(std::istream& in, const std::string& source = "<stream>");

  friend bool operator==(const EventLog&, const EventLog&) = default;

 private:
  std::vector<LogEntry> entries_;
};

struct SimulationOptions {
  double threshold = kDefaultThreshold;
  std::size_t event_window_ticks = kDefaultEventWindowTicks;
};

/// Tick 0: positions at t = 0 scored by the current model. Not logged.
WorldState initial_state(const Scenario& scenario, const NetworkBank& bank,
                         const SimulationOptions& options = {});

/// Advances one tick: scripted objects follow their waypoints, the user
/// object moves by `command` (or its standing command) clamped to the area,
/// the model for N scores everyone, alarms are recomputed and the tick is
/// appended to `log`. Throws MissingModel when the bank cannot serve N.
WorldState step(const WorldState& state, const Scenario& scenario, const NetworkBank& bank,
                const std::optional<SteerCommand>& command, EventLog& log,
                const SimulationOptions& options = {});

/// A ground-truth hostile window in which the object never raised an alarm,
/// packaged as labelled snapshots ready for retraining.
struct MissedEvent {
  std::size_t object = 0;  // 1-based
  TimeWindow window;
  std::uint64_t first_tick = 0;
  std::uint64_t last_tick = 0;
  /// Up to `event_window_ticks` snapshots ending at the window's last logged
  /// tick; every object labelled by its own ground truth at that tick.
  std::vector<Observation> records;
};

/// Only windows that closed inside the log are considered.
std::vector<MissedEvent> detect_missed_event(const EventLog& log, const Scenario& scenario,
                                             const SimulationOptions& options = {});

/// Labelled snapshots for object `object` (1-based) over ticks
/// [first_tick, last_tick], as recorded in `log`.
std::vector<Observation> window_records(const EventLog& log, std::size_t object,
                                        std::uint64_t first_tick, std::uint64_t last_tick);

using SteerScript = std::map<std::uint64_t, SteerCommand>;

struct HeadlessResult {
  EventLog log;
  WorldState final_state;
  /// Threshold-mode confusion and error histogram of every logged
  /// prediction against ground truth; absent when no ticks ran.
  std::optional<ConfusionMatrix> confusion;
  std::optional<ErrorHistogram> histogram;
};

/// Runs `ticks` steps without an operator. A scenario with a user-steered
/// object needs `script` (commands keyed by the tick they apply to).
HeadlessResult run_headless(const Scenario& scenario, const NetworkBank& bank, std::uint64_t ticks,
                            const SimulationOptions& options = {},
                            const SteerScript* script = nullptr);

/// Writes events.jsonl, confusion.txt/.csv and histogram.txt/.csv into `dir`.
void write_headless_outputs(const HeadlessResult& result, const std::filesystem::path& dir);

}  // namespace sentinel
