// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sentinel/netbank.hpp"
#include "sentinel/protocol.hpp"
#include "sentinel/scenario.hpp"
#include "sentinel/simulator.hpp"

namespace sentinel {

struct ServiceOptions {
  SimulationOptions simulation;
  /// Messages buffered per client before the oldest snapshot is dropped.
  std::size_t client_queue = 64;
  /// Retrain on ground-truth windows that closed without an alarm.
  bool auto_retrain = true;
  RetrainOptions retrain;
};

/// Bounded per-client queue. When full, the oldest queued snapshot is
/// dropped (or the oldest message if no snapshot is queued).
class Outbox {
 public:
  explicit Outbox(std::size_t capacity);

  void push(protocol::Message message);
  /// Waits up to `timeout`; empty when nothing arrived or the box is closed.
  std::optional<protocol::Message> pop(std::chrono::milliseconds timeout);
  std::vector<protocol::Message> drain();
  void close();
  bool closed() const;
  std::size_t dropped() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<protocol::Message> queue_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

/// Transport-independent session logic. The tick loop is the single writer
/// of world state; clients enqueue commands that apply at the next tick.
/// Retraining runs on a worker thread and the bank swaps models between ticks.
class ServiceCore {
 public:
  /// Throws MissingModel when the bank cannot serve the scenario's N.
  ServiceCore(Scenario scenario, NetworkBank& bank, ServiceOptions options = {});
  ~ServiceCore();

  ServiceCore(const ServiceCore&) = delete;
  ServiceCore& operator=(const ServiceCore&) = delete;

  /// Registers a client; its first messages are the current snapshot and
  /// the retrain status.
  std::shared_ptr<Outbox> connect();
  void disconnect(const std::shared_ptr<Outbox>& client);

  /// Decodes one inbound payload. Problems are answered on `client` with an
  /// error message; the session stays open.
  void handle(const std::shared_ptr<Outbox>& client, std::string_view payload);

  /// Advances the world one tick and broadcasts the snapshot.
  protocol::StateSnapshot tick();

  protocol::StateSnapshot snapshot() const;
  EventLog log() const;
  const Scenario& scenario() const noexcept { return scenario_; }

  /// Blocks until every queued retrain has finished.
  void wait_idle();

 private:
  struct Mark {
    std::weak_ptr<Outbox> client;
    protocol::MarkHostile request;
  };

  void broadcast(const protocol::Message& message);
  void enqueue_retrain(std::vector<Observation> records);
  void worker_loop();

  Scenario scenario_;
  NetworkBank& bank_;
  ServiceOptions options_;

  mutable std::mutex state_mutex_;
  WorldState state_;
  EventLog log_;
  std::optional<SteerCommand> pending_steer_;
  std::vector<Mark> pending_marks_;
  std::set<std::pair<std::size_t, double>> handled_windows_;

  std::mutex clients_mutex_;
  std::vector<std::shared_ptr<Outbox>> clients_;

  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::deque<std::vector<Observation>> jobs_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

/// Length-prefixed JSON over TCP. One reader and one writer thread per
/// client, one accept thread and one tick thread.
class TcpServer {
 public:
  /// `bind_address` is "host:port"; port 0 picks a free port. Throws Error
  /// when the address cannot be bound.
  TcpServer(ServiceCore& core, const std::string& bind_address);
  ~TcpServer();

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }

  /// Starts accepting clients and ticking every `tick_period`.
  void start(std::chrono::milliseconds tick_period);
  void stop();

 private:
  struct Session {
    int fd = -1;
    std::shared_ptr<Outbox> outbox;
    std::thread reader;
    std::thread writer;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void tick_loop(std::chrono::milliseconds period);
  void read_loop(Session& session);
  void write_loop(Session& session);
  void reap(bool all);

  ServiceCore& core_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::thread ticker_;
  std::mutex sessions_mutex_;
  std::list<Session> sessions_;
};

}  // namespace sentinel
