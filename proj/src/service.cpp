// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/service.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <iostream>

namespace sentinel {

using protocol::ErrorMessage;
using protocol::MarkHostile;
using protocol::Message;
using protocol::RetrainPhase;
using protocol::RetrainStatus;
using protocol::StateSnapshot;

Outbox::Outbox(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

void Outbox::push(Message message) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (queue_.size() >= capacity_) {
      auto it = std::find_if(queue_.begin(), queue_.end(),
                             [](const Message& m) { return std::holds_alternative<StateSnapshot>(m); });
      queue_.erase(it != queue_.end() ? it : queue_.begin());
      ++dropped_;
    }
    queue_.push_back(std::move(message));
  }
  ready_.notify_one();
}

std::optional<Message> Outbox::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  ready_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::vector<Message> Outbox::drain() {
  std::lock_guard lock(mutex_);
  std::vector<Message> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

void Outbox::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  ready_.notify_all();
}

bool Outbox::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t Outbox::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

ServiceCore::ServiceCore(Scenario scenario, NetworkBank& bank, ServiceOptions options)
    : scenario_(std::move(scenario)), bank_(bank), options_(std::move(options)) {
  state_ = initial_state(scenario_, bank_, options_.simulation);
  worker_ = std::thread([this] { worker_loop(); });
}

ServiceCore::~ServiceCore() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  worker_.join();
}

std::shared_ptr<Outbox> ServiceCore::connect() {
  auto client = std::make_shared<Outbox>(options_.client_queue);
  bool busy;
  {
    std::lock_guard lock(jobs_mutex_);
    busy = busy_ || !jobs_.empty();
  }
  std::lock_guard lock(clients_mutex_);
  client->push(snapshot());
  client->push(RetrainStatus{scenario_.n_objects, bank_.select(scenario_.n_objects)->version,
                             busy ? RetrainPhase::training : RetrainPhase::idle});
  clients_.push_back(client);
  return client;
}

void ServiceCore::disconnect(const std::shared_ptr<Outbox>& client) {
  client->close();
  std::lock_guard lock(clients_mutex_);
  std::erase(clients_, client);
}

void ServiceCore::handle(const std::shared_ptr<Outbox>& client, std::string_view payload) {
  Message message;
  try {
    message = protocol::decode(payload);
  } catch (const protocol::ProtocolError& e) {
    client->push(ErrorMessage{e.code(), e.what()});
    return;
  }
  if (const auto* steer = std::get_if<SteerCommand>(&message)) {
    if (!scenario_.user_object()) {
      client->push(ErrorMessage{"no_user_object", "scenario has no user-steered object"});
      return;
    }
    std::lock_guard lock(state_mutex_);
    pending_steer_ = *steer;
  } else if (const auto* mark = std::get_if<MarkHostile>(&message)) {
    if (mark->index > scenario_.n_objects) {
      client->push(ErrorMessage{"invalid", "object index " + std::to_string(mark->index) + " outside [1, " +
                                               std::to_string(scenario_.n_objects) + "]"});
      return;
    }
    std::lock_guard lock(state_mutex_);
    pending_marks_.push_back({client, *mark});
  } else {
    client->push(ErrorMessage{"unsupported", "clients may send steer_command or mark_hostile"});
  }
}

StateSnapshot ServiceCore::tick() {
  StateSnapshot snap;
  std::vector<Mark> marks;
  {
    std::lock_guard lock(state_mutex_);
    const double before = scenario_.time_of(state_.tick);
    std::optional<SteerCommand> command = std::exchange(pending_steer_, std::nullopt);
    state_ = step(state_, scenario_, bank_, command, log_, options_.simulation);
    const double now = scenario_.time_of(state_.tick);

    marks = std::exchange(pending_marks_, {});
    for (const Mark& mark : marks) {
      const std::uint64_t last = state_.tick;
      const std::uint64_t first = last >= mark.request.tick_window ? last - mark.request.tick_window + 1 : 1;
      enqueue_retrain(window_records(log_, mark.request.index, first, last));
    }

    if (options_.auto_retrain) {
      bool closed = false;
      for (const auto& windows : scenario_.ground_truth) {
        for (const TimeWindow& w : windows) closed = closed || (w.end > before && w.end <= now);
      }
      if (closed) {
        for (MissedEvent& event : detect_missed_event(log_, scenario_, options_.simulation)) {
          if (handled_windows_.insert({event.object, event.window.start}).second) {
            enqueue_retrain(std::move(event.records));
          }
        }
      }
    }
    snap = protocol::snapshot_of(state_);
  }
  broadcast(snap);
  return snap;
}

StateSnapshot ServiceCore::snapshot() const {
  std::lock_guard lock(state_mutex_);
  return protocol::snapshot_of(state_);
}

EventLog ServiceCore::log() const {
  std::lock_guard lock(state_mutex_);
  return log_;
}

void ServiceCore::wait_idle() {
  std::unique_lock lock(jobs_mutex_);
  jobs_cv_.wait(lock, [&] { return stopping_ || (jobs_.empty() && !busy_); });
}

void ServiceCore::broadcast(const Message& message) {
  std::lock_guard lock(clients_mutex_);
  for (const auto& client : clients_) client->push(message);
}

void ServiceCore::enqueue_retrain(std::vector<Observation> records) {
  {
    std::lock_guard lock(jobs_mutex_);
    jobs_.push_back(std::move(records));
  }
  jobs_cv_.notify_all();
}

void ServiceCore::worker_loop() {
  const std::size_t n = scenario_.n_objects;
  for (;;) {
    std::vector<Observation> records;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
      if (stopping_) return;
      records = std::move(jobs_.front());
      jobs_.pop_front();
      busy_ = true;
    }
    const std::uint64_t version = bank_.select(n)->version;
    broadcast(RetrainStatus{n, version, RetrainPhase::training});
    try {
      auto record = bank_.retrain_from_event(n, records, options_.retrain);
      broadcast(RetrainStatus{n, record->version, RetrainPhase::swapped});
    } catch (const std::exception& e) {
      broadcast(ErrorMessage{"retrain", e.what()});
      broadcast(RetrainStatus{n, version, RetrainPhase::idle});
    }
    {
      std::lock_guard lock(jobs_mutex_);
      busy_ = false;
    }
    jobs_cv_.notify_all();
  }
}

namespace {

bool send_all(int fd, const std::string& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

TcpServer::TcpServer(ServiceCore& core, const std::string& bind_address) : core_(core) {
  const auto colon = bind_address.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("bind address must be host:port, got '" + bind_address + "'");
  const std::string host = bind_address.substr(0, colon);
  const std::string port = bind_address.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  if (int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    throw Error("cannot resolve " + bind_address + ": " + ::gai_strerror(rc));
  }
  std::string failure = "no usable address";
  for (addrinfo* a = found; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
      listen_fd_ = fd;
      break;
    }
    failure = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) throw Error("cannot bind " + bind_address + ": " + failure);

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  }
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start(std::chrono::milliseconds tick_period) {
  if (running_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
  ticker_ = std::thread([this, tick_period] { tick_loop(tick_period); });
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  acceptor_.join();
  ticker_.join();
  {
    std::lock_guard lock(sessions_mutex_);
    for (Session& s : sessions_) ::shutdown(s.fd, SHUT_RDWR);
  }
  reap(true);
}

void TcpServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) > 0 && (p.revents & POLLIN)) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd >= 0) {
        std::lock_guard lock(sessions_mutex_);
        Session& s = sessions_.emplace_back();
        s.fd = fd;
        s.outbox = core_.connect();
        s.reader = std::thread([this, &s] { read_loop(s); });
        s.writer = std::thread([this, &s] { write_loop(s); });
      }
    }
    reap(false);
  }
}

void TcpServer::tick_loop(std::chrono::milliseconds period) {
  auto next = std::chrono::steady_clock::now();
  while (running_) {
    next += period;
    std::this_thread::sleep_until(next);
    if (!running_) break;
    try {
      core_.tick();
    } catch (const std::exception& e) {
      std::cerr << "sentinel: tick failed: " << e.what() << '\n';
      return;
    }
  }
}

void TcpServer::read_loop(Session& s) {
  protocol::FrameDecoder decoder;
  char buffer[4096];
  bool open = true;
  while (open && running_) {
    pollfd p{s.fd, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const ssize_t n = ::recv(s.fd, buffer, sizeof buffer, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    decoder.feed({buffer, static_cast<std::size_t>(n)});
    try {
      while (auto payload = decoder.next()) core_.handle(s.outbox, *payload);
    } catch (const protocol::ProtocolError& e) {
      // Framing is lost; report and hang up.
      s.outbox->push(ErrorMessage{e.code(), e.what()});
      open = false;
    }
  }
  s.outbox->close();
  s.done = true;
}

void TcpServer::write_loop(Session& s) {
  for (;;) {
    auto message = s.outbox->pop(std::chrono::milliseconds(100));
    if (!message) {
      if (s.outbox->closed()) break;
      continue;
    }
    if (!send_all(s.fd, protocol::frame(protocol::encode(*message)))) {
      ::shutdown(s.fd, SHUT_RDWR);
      break;
    }
  }
}

void TcpServer::reap(bool all) {
  std::lock_guard lock(sessions_mutex_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (!all && !it->done) {
      ++it;
      continue;
    }
    it->reader.join();
    it->outbox->close();
    it->writer.join();
    core_.disconnect(it->outbox);
    ::close(it->fd);
    it = sessions_.erase(it);
  }
}

}  // namespace sentinel
