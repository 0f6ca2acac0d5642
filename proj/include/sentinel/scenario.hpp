// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/dataset.hpp"

namespace sentinel {

struct Waypoint {
  double time = 0.0;  // simulated seconds
  Location position;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Closed interval of simulated time.
struct TimeWindow {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const noexcept { return t >= start && t <= end; }

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// Scripted path through waypoints (linear in between, held before the first
/// and after the last), or an operator-steered object starting at its first
/// waypoint.
struct Trajectory {
  bool user_steered = false;
  std::vector<Waypoint> waypoints;

  Location position_at(double time) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Scenario {
  DatasetMeta meta;
  std::size_t n_objects = 0;
  double tick_interval = 1.0;
  /// Landmass occupies x >= protected_edge_x up to the right bound.
  double protected_edge_x = 0.0;
  std::vector<Trajectory> trajectories;
  /// Hostile windows per object, sorted and non-overlapping.
  std::vector<std::vector<TimeWindow>> ground_truth;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when a waypoint leaves the bounds, more than one
  /// object is user-steered, or windows are not well ordered.
  void validate() const;

  double time_of(std::uint64_t tick) const noexcept {
    return static_cast<double>(tick) * tick_interval;
  }
  bool hostile_at(std::size_t object, double time) const;
  std::optional<std::size_t> user_object() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Scenario file (JSON), see docs/formats.md.
void write_scenario(const Scenario& scenario, std::ostream& out);
void write_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario read_scenario(std::istream& in, const std::string& source = "<stream>");
Scenario read_scenario(const std::filesystem::path& path);

/// Parameterized approach toward the protected edge.
enum class AttackPattern {
  straight_run,
  arc_approach,
  feint_and_turn,
  zigzag,
  diagonal_dive,
  /// Low run toward the edge just north of the southern patrol area; kept
  /// out of the default training mix.
  coastal_creep,
};

inline constexpr std::size_t kTrainedPatternCount = 5;

std::string to_string(AttackPattern pattern);
std::optional<AttackPattern> parse_attack_pattern(std::string_view name);

struct ScenarioSpec {
  std::size_t n_objects = 5;
  std::size_t n_patterns = 5;
  std::size_t records_per_pattern = 99;
  /// When non-zero, overrides n_patterns * records_per_pattern and spreads
  /// the records over patterns as evenly as possible (earlier patterns get
  /// the extra ones).
  std::size_t total_records = 0;
  std::uint64_t seed = 0;
  /// Explicit patterns, one per attack; defaults to the first n_patterns of
  /// the trained catalogue.
  std::vector<AttackPattern> patterns;
  AreaBounds bounds{0, 0, 1000, 1000};
  double tick_interval = 1.0;
  /// Benign ticks before the first and between consecutive attacks.
  std::size_t gap_ticks = 5;
  /// Quiet ticks after the last attack, recorded as a second dataset group
  /// with every object labelled 0.0.
  std::size_t benign_records = 0;

  void validate() const;
};

/// JSON object whose keys mirror ScenarioSpec's fields; "patterns" is a list
/// of pattern names. Omitted keys keep their defaults; unknown keys fail.
ScenarioSpec read_scenario_spec(std::istream& in, const std::string& source = "<stream>");
ScenarioSpec read_scenario_spec(const std::filesystem::path& path);

struct GeneratedScenario {
  Scenario scenario;
  RawDataset dataset;
};

/// Builds a scenario in which attacks run one after another, each by a
/// different object, while the rest wander in benign regions (open water,
/// the shipping lane or the patrol area, cycling by object index). Every tick of
/// an attack window becomes one dataset record with the attacker labelled
/// 1.0 and everyone else 0.0, so the dataset has K = 1 and M = total records.
/// With `benign_records` a second all-benign group follows.
GeneratedScenario generate_scenario(const ScenarioSpec& spec);

}  // namespace sentinel
