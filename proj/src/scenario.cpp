// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sentinel/error.hpp"
#include "sentinel/random.hpp"

namespace sentinel {

using nlohmann::json;

Location Trajectory::position_at(double time) const {
  if (waypoints.empty()) throw InvalidArgument("trajectory has no waypoints");
  if (time <= waypoints.front().time) return waypoints.front().position;
  if (time >= waypoints.back().time) return waypoints.back().position;
  auto next = std::upper_bound(waypoints.begin(), waypoints.end(), time,
                               [](double t, const Waypoint& w) { return t < w.time; });
  const Waypoint& b = *next;
  const Waypoint& a = *(next - 1);
  const double span = b.time - a.time;
  if (span <= 0.0) return b.position;
  const double f = (time - a.time) / span;
  return {a.position.x + f * (b.position.x - a.position.x),
          a.position.y + f * (b.position.y - a.position.y)};
}

void Scenario::validate() const {
  if (n_objects == 0) throw InvalidArgument("scenario needs at least one object");
  if (!meta.bounds.valid()) throw InvalidArgument("scenario bounds must satisfy min < max");
  if (!(tick_interval > 0.0) || !std::isfinite(tick_interval)) {
    throw InvalidArgument("tick_interval must be positive");
  }
  if (trajectories.size() != n_objects || ground_truth.size() != n_objects) {
    throw InvalidArgument("scenario must list a trajectory and ground truth for every object");
  }
  std::size_t steered = 0;
  for (std::size_t v = 0; v < n_objects; ++v) {
    const std::string who = "object " + std::to_string(v + 1);
    const Trajectory& tr = trajectories[v];
    if (tr.user_steered) ++steered;
    if (tr.waypoints.empty()) throw InvalidArgument(who + " has no waypoints");
    for (std::size_t i = 0; i < tr.waypoints.size(); ++i) {
      const Waypoint& w = tr.waypoints[i];
      if (!std::isfinite(w.time) || !meta.bounds.contains(w.position)) {
        throw InvalidArgument(who + " waypoint " + std::to_string(i + 1) + " is outside the area");
      }
      if (i && w.time < tr.waypoints[i - 1].time) {
        throw InvalidArgument(who + " waypoints go back in time");
      }
    }
    const auto& windows = ground_truth[v];
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (!(windows[i].start <= windows[i].end)) {
        throw InvalidArgument(who + " has a hostile window ending before it starts");
      }
      if (i && windows[i].start <= windows[i - 1].end) {
        throw InvalidArgument(who + " has overlapping or unsorted hostile windows");
      }
    }
  }
  if (steered > 1) throw InvalidArgument("at most one object may be user-steered");
}

bool Scenario::hostile_at(std::size_t object, double time) const {
  const auto& windows = ground_truth.at(object);
  return std::any_of(windows.begin(), windows.end(),
                     [time](const TimeWindow& w) { return w.contains(time); });
}

std::optional<std::size_t> Scenario::user_object() const {
  for (std::size_t v = 0; v < trajectories.size(); ++v) {
    if (trajectories[v].user_steered) return v;
  }
  return std::nullopt;
}

// ---- scenario file -----------------------------------------------------

void write_scenario(const Scenario& s, std::ostream& out) {
  s.validate();
  json objects = json::array();
  for (std::size_t v = 0; v < s.n_objects; ++v) {
    json waypoints = json::array();
    for (const Waypoint& w : s.trajectories[v].waypoints) {
      waypoints.push_back({w.time, w.position.x, w.position.y});
    }
    json windows = json::array();
    for (const TimeWindow& w : s.ground_truth[v]) windows.push_back({w.start, w.end});
    objects.push_back({{"index", v + 1},
                       {"user_steered", s.trajectories[v].user_steered},
                       {"waypoints", std::move(waypoints)},
                       {"hostile_windows", std::move(windows)}});
  }
  const AreaBounds& b = s.meta.bounds;
  json doc = {{"format", "sentinel-scenario"},
              {"version", 1},
              {"bounds", {b.min_x, b.min_y, b.max_x, b.max_y}},
              {"seed", s.seed},
              {"n_objects", s.n_objects},
              {"tick_interval", s.tick_interval},
              {"protected_edge_x", s.protected_edge_x},
              {"objects", std::move(objects)}};
  out << doc.dump(1) << '\n';
}

void write_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_scenario(scenario, out);
}

Scenario read_scenario(std::istream& in, const std::string& source) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(source, 0, std::string("invalid JSON: ") + e.what());
  }
  Scenario s;
  try {
    if (doc.at("format") != "sentinel-scenario") throw FormatError(source, 0, "not a scenario file");
    if (doc.at("version") != 1) throw FormatError(source, 0, "unsupported scenario version");
    const auto& b = doc.at("bounds");
    if (!b.is_array() || b.size() != 4) throw FormatError(source, 0, "bounds must have 4 numbers");
    s.meta.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                     b[3].get<double>()};
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.meta.seed = s.seed;
    s.n_objects = doc.at("n_objects").get<std::size_t>();
    s.tick_interval = doc.at("tick_interval").get<double>();
    s.protected_edge_x = doc.at("protected_edge_x").get<double>();
    const auto& objects = doc.at("objects");
    if (!objects.is_array() || objects.size() != s.n_objects) {
      throw FormatError(source, 0, "objects must list exactly n_objects entries");
    }
    for (std::size_t v = 0; v < objects.size(); ++v) {
      const auto& o = objects[v];
      if (o.at("index").get<std::size_t>() != v + 1) {
        throw FormatError(source, 0, "objects must be listed in index order starting at 1");
      }
      Trajectory tr;
      tr.user_steered = o.at("user_steered").get<bool>();
      for (const auto& w : o.at("waypoints")) {
        if (!w.is_array() || w.size() != 3) throw FormatError(source, 0, "waypoint must be [t, x, y]");
        tr.waypoints.push_back({w[0].get<double>(), {w[1].get<double>(), w[2].get<double>()}});
      }
      std::vector<TimeWindow> windows;
      for (const auto& w : o.at("hostile_windows")) {
        if (!w.is_array() || w.size() != 2) throw FormatError(source, 0, "window must be [start, end]");
        windows.push_back({w[0].get<double>(), w[1].get<double>()});
      }
      s.trajectories.push_back(std::move(tr));
      s.ground_truth.push_back(std::move(windows));
    }
  } catch (const json::exception& e) {
    throw FormatError(source, 0, std::string("invalid scenario: ") + e.what());
  }
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(source, 0, e.what());
  }
  return s;
}

Scenario read_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_scenario(in, path.string());
}

// ---- generator ---------------------------------------------------------

std::string to_string(AttackPattern pattern) {
  switch (pattern) {
    case AttackPattern::straight_run: return "straight_run";
    case AttackPattern::arc_approach: return "arc_approach";
    case AttackPattern::feint_and_turn: return "feint_and_turn";
    case AttackPattern::zigzag: return "zigzag";
    case AttackPattern::diagonal_dive: return "diagonal_dive";
    case AttackPattern::coastal_creep: return "coastal_creep";
  }
  return "unknown";
}

std::optional<AttackPattern> parse_attack_pattern(std::string_view name) {
  for (auto p : {AttackPattern::straight_run, AttackPattern::arc_approach,
                 AttackPattern::feint_and_turn, AttackPattern::zigzag,
                 AttackPattern::diagonal_dive, AttackPattern::coastal_creep}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

void ScenarioSpec::validate() const {
  if (n_objects == 0) throw InvalidArgument("scenario spec needs n_objects >= 1");
  const std::size_t attacks = patterns.empty() ? n_patterns : patterns.size();
  if (attacks == 0) throw InvalidArgument("scenario spec needs at least one attack pattern");
  if (attacks > n_objects) {
    throw InvalidArgument("n_patterns (" + std::to_string(attacks) + ") exceeds n_objects (" +
                          std::to_string(n_objects) + ")");
  }
  if (!patterns.empty() && n_patterns != 0 && n_patterns != patterns.size()) {
    throw InvalidArgument("n_patterns disagrees with the explicit pattern list");
  }
  if (total_records == 0 && records_per_pattern == 0) {
    throw InvalidArgument("scenario spec needs records_per_pattern >= 1");
  }
  if (total_records != 0 && total_records < attacks) {
    throw InvalidArgument("total_records must give every pattern at least one record");
  }
  if (!bounds.valid()) throw InvalidArgument("scenario bounds must satisfy min < max");
  if (!(tick_interval > 0.0)) throw InvalidArgument("tick_interval must be positive");
}

namespace {

// Regions in unit coordinates; the landmass sits right of kEdge.
constexpr double kEdge = 0.97;

struct Box {
  double x0, y0, x1, y1;
};
// Open water far from the coast where benign contacts loiter.
constexpr Box kLoiter{0.03, 0.05, 0.40, 0.95};
// Coastal shipping lane along the bottom.
constexpr Box kLane{0.05, 0.03, 0.95, 0.10};
// Friendly patrol area off the southern coast.
constexpr Box kPatrol{0.55, 0.14, 0.95, 0.22};

using Path = std::vector<Location>;

Path attack_path(AttackPattern pattern, Rng& rng) {
  switch (pattern) {
    case AttackPattern::straight_run: {
      const double y0 = rng.uniform(0.48, 0.92);
      const double y1 = std::clamp(y0 + rng.uniform(-0.04, 0.04), 0.46, 0.94);
      return {{0.50, y0}, {kEdge, y1}};
    }
    case AttackPattern::arc_approach: {
      const Location p0{0.52, rng.uniform(0.90, 0.95)};
      const Location c{rng.uniform(0.88, 0.95), rng.uniform(0.90, 0.95)};
      const Location p1{kEdge, rng.uniform(0.46, 0.62)};
      Path path;
      for (int i = 0; i <= 8; ++i) {
        const double t = i / 8.0;
        const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, d = t * t;
        path.push_back({a * p0.x + b * c.x + d * p1.x, a * p0.y + b * c.y + d * p1.y});
      }
      return path;
    }
    case AttackPattern::feint_and_turn: {
      const double y0 = rng.uniform(0.50, 0.70);
      return {{0.50, y0}, {rng.uniform(0.68, 0.76), y0 + 0.22}, {kEdge, y0 - rng.uniform(0.0, 0.03)}};
    }
    case AttackPattern::zigzag: {
      const double y0 = rng.uniform(0.58, 0.82);
      const double amp = rng.uniform(0.06, 0.09);
      Path path;
      for (int i = 0; i <= 5; ++i) {
        path.push_back({0.50 + (kEdge - 0.50) * i / 5.0, y0 + (i % 2 ? amp : -amp)});
      }
      return path;
    }
    case AttackPattern::diagonal_dive:
      return {{0.52, rng.uniform(0.92, 0.96)}, {kEdge, rng.uniform(0.46, 0.52)}};
    case AttackPattern::coastal_creep: {
      const double y0 = rng.uniform(0.25, 0.29);
      Path path;
      for (int i = 0; i <= 4; ++i) {
        const double jitter = (i == 0 || i == 4) ? 0.0 : rng.uniform(-0.01, 0.01);
        path.push_back({0.50 + (kEdge - 0.50) * i / 4.0, y0 + jitter});
      }
      return path;
    }
  }
  return {};
}

double distance(const Location& a, const Location& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Location in_box(const Box& box, Rng& rng) {
  return {rng.uniform(box.x0, box.x1), rng.uniform(box.y0, box.y1)};
}

Location to_area(const Location& unit, const AreaBounds& b) {
  return {b.min_x + unit.x * (b.max_x - b.min_x), b.min_y + unit.y * (b.max_y - b.min_y)};
}

// Appends the path spread over [t0, t1] at constant speed.
void append_path(std::vector<Waypoint>& out, const Path& path, double t0, double t1) {
  if (t1 <= t0 || path.size() == 1) {
    out.push_back({t0, path.front()});
    return;
  }
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < path.size(); ++i) {
    cumulative.push_back(cumulative.back() + distance(path[i - 1], path[i]));
  }
  for (std::size_t i = 0; i < path.size(); ++i) {
    out.push_back({t0 + (t1 - t0) * cumulative[i] / cumulative.back(), path[i]});
  }
  out.back().time = t1;
}

// Random waypoints inside `box` from t0 to t1 inclusive.
void append_wander(std::vector<Waypoint>& out, const Box& box, double t0, double t1, Rng& rng) {
  double t = t0;
  out.push_back({t, in_box(box, rng)});
  while (t < t1) {
    t = std::min(t1, t + rng.uniform(6.0, 15.0));
    out.push_back({t, in_box(box, rng)});
  }
}

}  // namespace

ScenarioSpec read_scenario_spec(std::istream& in, const std::string& source) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(source, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError(source, 0, "scenario spec must be a JSON object");
  ScenarioSpec spec;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "n_objects") {
        spec.n_objects = value.get<std::size_t>();
      } else if (key == "n_patterns") {
        spec.n_patterns = value.get<std::size_t>();
      } else if (key == "records_per_pattern") {
        spec.records_per_pattern = value.get<std::size_t>();
      } else if (key == "total_records") {
        spec.total_records = value.get<std::size_t>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else if (key == "patterns") {
        for (const auto& name : value) {
          auto pattern = parse_attack_pattern(name.get<std::string>());
          if (!pattern) throw FormatError(source, 0, "unknown attack pattern '" + name.get<std::string>() + "'");
          spec.patterns.push_back(*pattern);
        }
      } else if (key == "bounds") {
        if (!value.is_array() || value.size() != 4) throw FormatError(source, 0, "bounds must have 4 numbers");
        spec.bounds = {value[0].get<double>(), value[1].get<double>(), value[2].get<double>(),
                       value[3].get<double>()};
      } else if (key == "tick_interval") {
        spec.tick_interval = value.get<double>();
      } else if (key == "gap_ticks") {
        spec.gap_ticks = value.get<std::size_t>();
      } else if (key == "benign_records") {
        spec.benign_records = value.get<std::size_t>();
      } else {
        throw FormatError(source, 0, "unknown scenario spec key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(source, 0, e.what());
  }
  if (!spec.patterns.empty() && !doc.contains("n_patterns")) spec.n_patterns = spec.patterns.size();
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(source, 0, e.what());
  }
  return spec;
}

ScenarioSpec read_scenario_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_scenario_spec(in, path.string());
}

GeneratedScenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  std::vector<AttackPattern> patterns = spec.patterns;
  if (patterns.empty()) {
    for (std::size_t i = 0; i < spec.n_patterns; ++i) {
      patterns.push_back(static_cast<AttackPattern>(i % kTrainedPatternCount));
    }
  }
  const std::size_t attacks = patterns.size();
  std::vector<std::size_t> lengths(attacks, spec.records_per_pattern);
  if (spec.total_records) {
    for (std::size_t i = 0; i < attacks; ++i) {
      lengths[i] = spec.total_records / attacks + (i < spec.total_records % attacks ? 1 : 0);
    }
  }

  const double dt = spec.tick_interval;
  const std::size_t n = spec.n_objects;
  Rng rng(spec.seed);

  // Attack i runs on object i over ticks [start_i, start_i + length_i - 1].
  std::vector<std::uint64_t> starts;
  std::uint64_t tick = spec.gap_ticks;
  for (std::size_t i = 0; i < attacks; ++i) {
    starts.push_back(tick);
    tick += lengths[i] + spec.gap_ticks;
  }
  const std::uint64_t benign_start = tick;
  tick += spec.benign_records;
  const double end_time = static_cast<double>(tick) * dt;

  std::vector<Box> benign_region(n);
  for (std::size_t v = 0; v < n; ++v) benign_region[v] = v % 3 == 0 ? kLoiter : v % 3 == 1 ? kLane : kPatrol;

  Scenario s;
  s.n_objects = n;
  s.tick_interval = dt;
  s.seed = spec.seed;
  s.meta.bounds = spec.bounds;
  s.meta.seed = spec.seed;
  s.protected_edge_x = to_area({kEdge, 0}, spec.bounds).x;
  s.trajectories.resize(n);
  s.ground_truth.resize(n);

  for (std::size_t v = 0; v < n; ++v) {
    std::vector<Waypoint> wps;
    double t = 0.0;
    for (std::size_t i = 0; i < attacks; ++i) {
      if (i != v) continue;
      const double t_start = static_cast<double>(starts[i]) * dt;
      const double t_end = static_cast<double>(starts[i] + lengths[i] - 1) * dt;
      if (t_start - dt >= t) append_wander(wps, benign_region[v], t, t_start - dt, rng);
      append_path(wps, attack_path(patterns[i], rng), t_start, t_end);
      s.ground_truth[v].push_back({t_start, t_end});
      t = t_end + dt;
    }
    append_wander(wps, benign_region[v], t, end_time, rng);
    for (Waypoint& w : wps) w.position = to_area(w.position, spec.bounds);
    s.trajectories[v].waypoints = std::move(wps);
  }

  RawDataset ds;
  ds.n_objects = n;
  ds.meta = s.meta;
  Group group;
  for (std::size_t i = 0; i < attacks; ++i) {
    for (std::uint64_t k = starts[i]; k < starts[i] + lengths[i]; ++k) {
      const double time = static_cast<double>(k) * dt;
      Observation obs;
      for (std::size_t v = 0; v < n; ++v) {
        obs.locations.push_back(s.trajectories[v].position_at(time));
        obs.hostility.push_back(s.hostile_at(v, time) ? 1.0 : 0.0);
      }
      group.push_back(std::move(obs));
    }
  }
  ds.groups.push_back(std::move(group));
  if (spec.benign_records) {
    Group quiet;
    for (std::uint64_t k = benign_start; k < benign_start + spec.benign_records; ++k) {
      const double time = static_cast<double>(k) * dt;
      Observation obs;
      for (std::size_t v = 0; v < n; ++v) {
        obs.locations.push_back(s.trajectories[v].position_at(time));
        obs.hostility.push_back(0.0);
      }
      quiet.push_back(std::move(obs));
    }
    ds.groups.push_back(std::move(quiet));
  }
  s.validate();
  return {std::move(s), std::move(ds)};
}

}  // namespace sentinel
