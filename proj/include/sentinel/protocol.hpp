// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sentinel/error.hpp"
#include "sentinel/simulator.hpp"

namespace sentinel::protocol {

struct ObjectState {
  std::size_t index = 0;  // 1-based
  double x = 0.0;
  double y = 0.0;
  double hostility = 0.0;

  friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct StateSnapshot {
  std::uint64_t tick = 0;
  std::vector<ObjectState> objects;
  std::vector<std::size_t> alarms;
  std::uint64_t model_version = 0;

  friend bool operator==(const StateSnapshot&, const StateSnapshot&) = default;
};

/// Operator report that object `index` has been hostile for the last
/// `tick_window` ticks.
struct MarkHostile {
  std::size_t index = 0;
  std::uint64_t tick_window = 0;

  friend bool operator==(const MarkHostile&, const MarkHostile&) = default;
};

enum class RetrainPhase { idle, training, swapped };

struct RetrainStatus {
  std::size_t n_objects = 0;
  std::uint64_t version = 0;
  RetrainPhase phase = RetrainPhase::idle;

  friend bool operator==(const RetrainStatus&, const RetrainStatus&) = default;
};

struct ErrorMessage {
  std::string code;
  std::string text;

  friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

using Message = std::variant<StateSnapshot, SteerCommand, MarkHostile, RetrainStatus, ErrorMessage>;

std::string to_string(RetrainPhase phase);

/// Raised for payloads that are not a valid message. `code()` is "parse"
/// for malformed JSON and "invalid" for well-formed JSON with a bad shape.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& what) : Error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// JSON object with a "type" discriminator.
std::string encode(const Message& message);
Message decode(std::string_view payload);

StateSnapshot snapshot_of(const WorldState& state);

inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

/// 4-byte big-endian payload length followed by the payload.
std::string frame(std::string_view payload);

/// Reassembles frames from arbitrary byte chunks.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  /// Next complete payload, if any. Throws ProtocolError("frame") when a
  /// declared length exceeds kMaxFrameBytes.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

}  // namespace sentinel::protocol
