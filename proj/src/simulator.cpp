// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "sentinel/error.hpp"

namespace sentinel {

using nlohmann::json;

void EventLog::append(LogEntry entry) {
  if (!entries_.empty() && entry.tick <= entries_.back().tick) {
    throw InvalidArgument("event log ticks must strictly increase (got " +
                          std::to_string(entry.tick) + " after " +
                          std::to_string(entries_.back().tick) + ")");
  }
  entries_.push_back(std::move(entry));
}

void EventLog::write_jsonl(std::ostream& out) const {
  for (const LogEntry& e : entries_) {
    json positions = json::array();
    for (const Location& p : e.positions) positions.push_back({p.x, p.y});
    json line = {{"tick", e.tick},
                 {"positions", std::move(positions)},
                 {"predictions", e.predictions},
                 {"alarms", e.alarms},
                 {"command", nullptr},
                 {"hostile", e.hostile},
                 {"model_version", e.model_version}};
    if (e.command) {
      line["command"] = {{"heading_degrees", e.command->heading_degrees},
                         {"speed", e.command->speed}};
    }
    out << line.dump() << '\n';
  }
}

EventLog EventLog::read_jsonl(std::istream& in, const std::string& source) {
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      json j = json::parse(line);
      LogEntry e;
      e.tick = j.at("tick").get<std::uint64_t>();
      for (const auto& p : j.at("positions")) e.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      e.predictions = j.at("predictions").get<std::vector<double>>();
      e.alarms = j.at("alarms").get<std::vector<std::size_t>>();
      e.hostile = j.at("hostile").get<std::vector<std::size_t>>();
      e.model_version = j.at("model_version").get<std::uint64_t>();
      if (!j.at("command").is_null()) {
        e.command = SteerCommand{j["command"].at("heading_degrees").get<double>(),
                                 j["command"].at("speed").get<double>()};
      }
      log.append(std::move(e));
    } catch (const json::exception& e) {
      throw FormatError(source, line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw FormatError(source, line_no, e.what());
    }
  }
  return log;
}

namespace {

Location clamp_to(const Location& p, const AreaBounds& b) {
  return {std::clamp(p.x, b.min_x, b.max_x), std::clamp(p.y, b.min_y, b.max_y)};
}

void score(WorldState& state, const NetworkBank& bank, const SimulationOptions& options) {
  auto record = bank.select(state.positions.size());
  state.last_prediction = predict(record->network, record->meta, state.positions);
  state.model_version = record->version;
  state.alarms.clear();
  for (std::size_t v = 0; v < state.last_prediction.size(); ++v) {
    if (state.last_prediction[v] >= options.threshold) state.alarms.push_back(v + 1);
  }
}

std::vector<std::size_t> hostile_objects(const Scenario& scenario, double time) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < scenario.n_objects; ++v) {
    if (scenario.hostile_at(v, time)) out.push_back(v + 1);
  }
  return out;
}

bool has(const std::vector<std::size_t>& sorted, std::size_t value) {
  return std::binary_search(sorted.begin(), sorted.end(), value);
}

}  // namespace

WorldState initial_state(const Scenario& scenario, const NetworkBank& bank,
                         const SimulationOptions& options) {
  scenario.validate();
  WorldState state;
  for (const Trajectory& tr : scenario.trajectories) {
    state.positions.push_back(clamp_to(tr.position_at(0.0), scenario.meta.bounds));
  }
  score(state, bank, options);
  return state;
}

WorldState step(const WorldState& state, const Scenario& scenario, const NetworkBank& bank,
                const std::optional<SteerCommand>& command, EventLog& log,
                const SimulationOptions& options) {
  if (state.positions.size() != scenario.n_objects) {
    throw InvalidArgument("world state does not match the scenario's object count");
  }
  WorldState next = state;
  next.tick = state.tick + 1;
  if (command) next.steering = *command;
  const double time = scenario.time_of(next.tick);
  const AreaBounds& bounds = scenario.meta.bounds;

  for (std::size_t v = 0; v < scenario.n_objects; ++v) {
    const Trajectory& tr = scenario.trajectories[v];
    if (tr.user_steered) {
      const double heading = next.steering.heading_degrees * std::numbers::pi / 180.0;
      const double distance = next.steering.speed * scenario.tick_interval;
      const Location& from = state.positions[v];
      next.positions[v] = clamp_to(
          {from.x + distance * std::cos(heading), from.y + distance * std::sin(heading)}, bounds);
    } else {
      next.positions[v] = clamp_to(tr.position_at(time), bounds);
    }
  }
  score(next, bank, options);

  LogEntry entry;
  entry.tick = next.tick;
  entry.positions = next.positions;
  entry.predictions = next.last_prediction;
  entry.alarms = next.alarms;
  entry.command = command;
  entry.hostile = hostile_objects(scenario, time);
  entry.model_version = next.model_version;
  log.append(std::move(entry));
  return next;
}

std::vector<Observation> window_records(const EventLog& log, std::size_t object,
                                        std::uint64_t first_tick, std::uint64_t last_tick) {
  std::vector<Observation> out;
  for (const LogEntry& e : log.entries()) {
    if (e.tick < first_tick || e.tick > last_tick) continue;
    if (object < 1 || object > e.positions.size()) {
      throw IndexError("object index " + std::to_string(object) + " outside [1, " +
                       std::to_string(e.positions.size()) + "]");
    }
    Observation obs;
    obs.locations = e.positions;
    for (std::size_t v = 1; v <= e.positions.size(); ++v) {
      obs.hostility.push_back(v == object || has(e.hostile, v) ? 1.0 : 0.0);
    }
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<MissedEvent> detect_missed_event(const EventLog& log, const Scenario& scenario,
                                             const SimulationOptions& options) {
  std::vector<MissedEvent> missed;
  if (log.empty()) return missed;
  const double last_time = scenario.time_of(log.entries().back().tick);

  for (std::size_t v = 0; v < scenario.n_objects; ++v) {
    for (const TimeWindow& window : scenario.ground_truth[v]) {
      if (window.end > last_time) continue;
      std::vector<const LogEntry*> inside;
      bool alarmed = false;
      for (const LogEntry& e : log.entries()) {
        if (!window.contains(scenario.time_of(e.tick))) continue;
        inside.push_back(&e);
        alarmed = alarmed || has(e.alarms, v + 1);
      }
      if (inside.empty() || alarmed) continue;

      const std::size_t keep = std::min(inside.size(), options.event_window_ticks);
      MissedEvent event;
      event.object = v + 1;
      event.window = window;
      event.first_tick = inside[inside.size() - keep]->tick;
      event.last_tick = inside.back()->tick;
      for (std::size_t i = inside.size() - keep; i < inside.size(); ++i) {
        Observation obs;
        obs.locations = inside[i]->positions;
        for (std::size_t u = 1; u <= scenario.n_objects; ++u) {
          obs.hostility.push_back(has(inside[i]->hostile, u) ? 1.0 : 0.0);
        }
        event.records.push_back(std::move(obs));
      }
      missed.push_back(std::move(event));
    }
  }
  return missed;
}

HeadlessResult run_headless(const Scenario& scenario, const NetworkBank& bank, std::uint64_t ticks,
                            const SimulationOptions& options, const SteerScript* script) {
  scenario.validate();
  if (scenario.user_object() && !script) {
    throw InvalidArgument("scenario has a user-steered object; headless runs need a steering script");
  }
  HeadlessResult result;
  result.final_state = initial_state(scenario, bank, options);
  for (std::uint64_t i = 0; i < ticks; ++i) {
    std::optional<SteerCommand> command;
    if (script) {
      auto it = script->find(result.final_state.tick + 1);
      if (it != script->end()) command = it->second;
    }
    result.final_state = step(result.final_state, scenario, bank, command, result.log, options);
  }
  if (!result.log.empty()) {
    Predictions p;
    for (const LogEntry& e : result.log.entries()) {
      p.outputs.push_back(e.predictions);
      std::vector<double> target(scenario.n_objects, 0.0);
      for (std::size_t v : e.hostile) target[v - 1] = 1.0;
      p.targets.push_back(std::move(target));
    }
    result.confusion = confusion(p, ConfusionMode::threshold, options.threshold);
    result.histogram = error_histogram(p);
  }
  return result;
}

void write_headless_outputs(const HeadlessResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("events.jsonl");
    result.log.write_jsonl(out);
  }
  if (result.confusion) {
    auto txt = open("confusion.txt");
    txt << format_table(*result.confusion);
    auto csv = open("confusion.csv");
    write_csv(*result.confusion, csv);
  }
  if (result.histogram) {
    auto txt = open("histogram.txt");
    txt << format_table(*result.histogram);
    auto csv = open("histogram.csv");
    write_csv(*result.histogram, csv);
  }
}

}  // namespace sentinel
