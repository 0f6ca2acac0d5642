// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/protocol.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace sentinel::protocol {

using nlohmann::json;

std::string to_string(RetrainPhase phase) {
  switch (phase) {
    case RetrainPhase::idle: return "idle";
    case RetrainPhase::training: return "training";
    case RetrainPhase::swapped: return "swapped";
  }
  return "idle";
}

namespace {

RetrainPhase parse_phase(const std::string& s) {
  if (s == "idle") return RetrainPhase::idle;
  if (s == "training") return RetrainPhase::training;
  if (s == "swapped") return RetrainPhase::swapped;
  throw ProtocolError("invalid", "unknown retrain phase '" + s + "'");
}

json to_json(const Message& message) {
  struct Visitor {
    json operator()(const StateSnapshot& s) const {
      json objects = json::array();
      for (const ObjectState& o : s.objects) {
        objects.push_back({{"index", o.index}, {"x", o.x}, {"y", o.y}, {"hostility", o.hostility}});
      }
      return {{"type", "state_snapshot"},
              {"tick", s.tick},
              {"objects", std::move(objects)},
              {"alarms", s.alarms},
              {"model_version", s.model_version}};
    }
    json operator()(const SteerCommand& c) const {
      return {{"type", "steer_command"}, {"heading_degrees", c.heading_degrees}, {"speed", c.speed}};
    }
    json operator()(const MarkHostile& m) const {
      return {{"type", "mark_hostile"}, {"index", m.index}, {"tick_window", m.tick_window}};
    }
    json operator()(const RetrainStatus& r) const {
      return {{"type", "retrain_status"},
              {"n_objects", r.n_objects},
              {"version", r.version},
              {"phase", to_string(r.phase)}};
    }
    json operator()(const ErrorMessage& e) const {
      return {{"type", "error"}, {"code", e.code}, {"text", e.text}};
    }
  };
  return std::visit(Visitor{}, message);
}

double finite(const json& j, const char* key) {
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ProtocolError("invalid", std::string(key) + " must be finite");
  return v;
}

}  // namespace

std::string encode(const Message& message) { return to_json(message).dump(); }

Message decode(std::string_view payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::parse_error& e) {
    throw ProtocolError("parse", e.what());
  }
  try {
    if (!j.is_object()) throw ProtocolError("invalid", "message must be a JSON object");
    const std::string type = j.at("type").get<std::string>();
    if (type == "state_snapshot") {
      StateSnapshot s;
      s.tick = j.at("tick").get<std::uint64_t>();
      for (const json& o : j.at("objects")) {
        s.objects.push_back({o.at("index").get<std::size_t>(), finite(o, "x"), finite(o, "y"),
                             finite(o, "hostility")});
      }
      s.alarms = j.at("alarms").get<std::vector<std::size_t>>();
      s.model_version = j.at("model_version").get<std::uint64_t>();
      return s;
    }
    if (type == "steer_command") {
      SteerCommand c{finite(j, "heading_degrees"), finite(j, "speed")};
      if (c.speed < 0.0) throw ProtocolError("invalid", "speed must be >= 0");
      return c;
    }
    if (type == "mark_hostile") {
      MarkHostile m{j.at("index").get<std::size_t>(), j.at("tick_window").get<std::uint64_t>()};
      if (m.index == 0) throw ProtocolError("invalid", "index is 1-based");
      if (m.tick_window == 0) throw ProtocolError("invalid", "tick_window must be >= 1");
      return m;
    }
    if (type == "retrain_status") {
      return RetrainStatus{j.at("n_objects").get<std::size_t>(), j.at("version").get<std::uint64_t>(),
                           parse_phase(j.at("phase").get<std::string>())};
    }
    if (type == "error") {
      return ErrorMessage{j.at("code").get<std::string>(), j.at("text").get<std::string>()};
    }
    throw ProtocolError("invalid", "unknown message type '" + type + "'");
  } catch (const json::exception& e) {
    throw ProtocolError("invalid", e.what());
  }
}

StateSnapshot snapshot_of(const WorldState& state) {
  StateSnapshot s;
  s.tick = state.tick;
  for (std::size_t v = 0; v < state.positions.size(); ++v) {
    const double h = v < state.last_prediction.size() ? state.last_prediction[v] : 0.0;
    s.objects.push_back({v + 1, state.positions[v].x, state.positions[v].y, h});
  }
  s.alarms = state.alarms;
  s.model_version = state.model_version;
  return s;
}

std::string frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) {
    throw ProtocolError("frame", "payload of " + std::to_string(payload.size()) + " bytes exceeds limit");
  }
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
  out.append(payload);
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
  if (n > kMaxFrameBytes) {
    buffer_.clear();
    throw ProtocolError("frame", "declared frame length " + std::to_string(n) + " exceeds limit");
  }
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + std::size_t{n});
  return payload;
}

}  // namespace sentinel::protocol
