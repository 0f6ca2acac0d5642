// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "doctest.h"
#include "sentinel/protocol.hpp"
#include "sentinel/service.hpp"
#include "world.hpp"

using namespace sentinel;
using namespace std::chrono_literals;
using sentinel::testing::publish_constant;
using sentinel::testing::still_scenario;

namespace {

template <typename T>
T expect(const std::optional<protocol::Message>& m) {
  REQUIRE(m.has_value());
  REQUIRE(std::holds_alternative<T>(*m));
  return std::get<T>(*m);
}

// Pops until a message of type T shows up.
template <typename T>
T await(Outbox& box, std::chrono::milliseconds limit = 5000ms) {
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    auto m = box.pop(50ms);
    if (m && std::holds_alternative<T>(*m)) return std::get<T>(*m);
  }
  FAIL("timed out");
  return {};
}

class Client {
 public:
  explicit Client(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    timeval tv{5, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~Client() { ::close(fd_); }

  void send_raw(std::string_view bytes) {
    REQUIRE(::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(bytes.size()));
  }
  void send(const protocol::Message& m) { send_raw(protocol::frame(protocol::encode(m))); }

  /// Next message, or nothing once the server has closed the connection.
  std::optional<protocol::Message> receive() {
    for (;;) {
      if (auto p = decoder_.next()) return protocol::decode(*p);
      char buf[4096];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n <= 0) return std::nullopt;
      decoder_.feed({buf, static_cast<std::size_t>(n)});
    }
  }

  template <typename T>
  T receive_as() {
    for (int i = 0; i < 1000; ++i) {
      auto m = receive();
      REQUIRE(m.has_value());
      if (std::holds_alternative<T>(*m)) return std::get<T>(*m);
    }
    FAIL("message never arrived");
    return {};
  }

 private:
  int fd_ = -1;
  protocol::FrameDecoder decoder_;
};

}  // namespace

TEST_CASE("every message type survives encode and decode") {
  using namespace protocol;
  const std::vector<Message> all{
      StateSnapshot{7, {{1, 0.25, 99.5, 0.125}, {2, 3, 4, 0.875}}, {2}, 3},
      StateSnapshot{},
      SteerCommand{270.5, 12.25},
      MarkHostile{4, 30},
      RetrainStatus{5, 2, RetrainPhase::training},
      RetrainStatus{5, 3, RetrainPhase::swapped},
      ErrorMessage{"parse", "unexpected end"},
  };
  for (const Message& m : all) CHECK(decode(encode(m)) == m);
  CHECK(encode(SteerCommand{90, 1}).find("\"type\":\"steer_command\"") != std::string::npos);
}

TEST_CASE("decode rejects malformed and ill-shaped payloads") {
  using protocol::ProtocolError;
  auto code_of = [](std::string_view payload) {
    try {
      protocol::decode(payload);
    } catch (const ProtocolError& e) {
      return e.code();
    }
    return std::string("accepted");
  };
  CHECK(code_of("{\"type\": ") == "parse");
  CHECK(code_of("[1, 2]") == "invalid");
  CHECK(code_of(R"({"type": "teleport"})") == "invalid");
  CHECK(code_of(R"({"heading_degrees": 1, "speed": 1})") == "invalid");
  CHECK(code_of(R"({"type": "steer_command", "heading_degrees": 1, "speed": -1})") == "invalid");
  CHECK(code_of(R"({"type": "steer_command", "heading_degrees": "north", "speed": 1})") == "invalid");
  CHECK(code_of(R"({"type": "mark_hostile", "index": 0, "tick_window": 3})") == "invalid");
  CHECK(code_of(R"({"type": "mark_hostile", "index": 2, "tick_window": 0})") == "invalid");
  CHECK(code_of(R"({"type": "retrain_status", "n_objects": 5, "version": 1, "phase": "x"})") == "invalid");
  CHECK(code_of(R"({"type": "mark_hostile", "index": 2, "tick_window": 3})") == "accepted");
}

TEST_CASE("frame decoder reassembles arbitrary chunks") {
  const std::string a = protocol::encode(SteerCommand{10, 2});
  const std::string b = protocol::encode(protocol::MarkHostile{1, 5});
  const std::string stream = protocol::frame(a) + protocol::frame(b) + protocol::frame("");
  CHECK(stream.substr(0, 4) == std::string("\0\0\0", 3) + static_cast<char>(a.size()));

  protocol::FrameDecoder dec;
  std::vector<std::string> got;
  for (char c : stream) {
    dec.feed(std::string_view(&c, 1));
    while (auto p = dec.next()) got.push_back(*p);
  }
  CHECK(got == std::vector<std::string>{a, b, ""});
  CHECK_FALSE(dec.next().has_value());

  protocol::FrameDecoder whole;
  whole.feed(stream);
  CHECK(whole.next() == a);
  CHECK(whole.next() == b);

  protocol::FrameDecoder big;
  big.feed(std::string("\x00\x20\x00\x01", 4));
  CHECK_THROWS_AS(big.next(), protocol::ProtocolError);
  CHECK_THROWS_AS(protocol::frame(std::string(protocol::kMaxFrameBytes + 1, 'x')), protocol::ProtocolError);
}

TEST_CASE("snapshot mirrors the world state") {
  WorldState st;
  st.tick = 4;
  st.positions = {{1, 2}, {3, 4}};
  st.last_prediction = {0.1, 0.9};
  st.alarms = {2};
  st.model_version = 6;
  auto s = protocol::snapshot_of(st);
  CHECK(s.tick == 4);
  CHECK(s.objects[1] == protocol::ObjectState{2, 3, 4, 0.9});
  CHECK(s.alarms == std::vector<std::size_t>{2});
  CHECK(s.model_version == 6);
}

TEST_CASE("outbox drops the oldest snapshot first") {
  Outbox box(3);
  box.push(protocol::RetrainStatus{2, 1, protocol::RetrainPhase::idle});
  box.push(protocol::StateSnapshot{1, {}, {}, 1});
  box.push(protocol::StateSnapshot{2, {}, {}, 1});
  box.push(protocol::StateSnapshot{3, {}, {}, 1});
  CHECK(box.dropped() == 1);
  auto items = box.drain();
  REQUIRE(items.size() == 3);
  CHECK(std::holds_alternative<protocol::RetrainStatus>(items[0]));
  CHECK(std::get<protocol::StateSnapshot>(items[1]).tick == 2);
  CHECK(std::get<protocol::StateSnapshot>(items[2]).tick == 3);

  Outbox errors(2);
  errors.push(protocol::ErrorMessage{"a", ""});
  errors.push(protocol::ErrorMessage{"b", ""});
  errors.push(protocol::ErrorMessage{"c", ""});
  CHECK(std::get<protocol::ErrorMessage>(errors.drain()[0]).code == "b");

  box.push(protocol::StateSnapshot{4, {}, {}, 1});
  box.close();
  CHECK(box.closed());
  CHECK(box.pop(10ms).has_value());
  CHECK_FALSE(box.pop(10ms).has_value());
}

TEST_CASE("service core: connect, steer, errors, ticks") {
  NetworkBank bank;
  publish_constant(bank, 2);
  Scenario s = still_scenario(2);
  s.tick_interval = 0.5;
  s.trajectories[1].user_steered = true;
  ServiceCore core(s, bank);

  auto client = core.connect();
  auto first = expect<protocol::StateSnapshot>(client->pop(1s));
  CHECK(first.tick == 0);
  CHECK(expect<protocol::RetrainStatus>(client->pop(1s)).phase == protocol::RetrainPhase::idle);
  const double y0 = first.objects[1].y;

  core.handle(client, protocol::encode(SteerCommand{90, 5}));
  auto t1 = core.tick();
  CHECK(t1.tick == 1);
  CHECK(t1.objects[1].y == doctest::Approx(y0 + 5 * 0.5));
  CHECK(t1.objects[1].x == doctest::Approx(first.objects[1].x));
  CHECK(expect<protocol::StateSnapshot>(client->pop(1s)) == t1);

  core.handle(client, "{\"type\": \"steer");
  CHECK(expect<protocol::ErrorMessage>(client->pop(1s)).code == "parse");
  core.handle(client, protocol::encode(protocol::MarkHostile{9, 1}));
  CHECK(expect<protocol::ErrorMessage>(client->pop(1s)).code == "invalid");
  core.handle(client, protocol::encode(protocol::RetrainStatus{}));
  CHECK(expect<protocol::ErrorMessage>(client->pop(1s)).code == "unsupported");

  // Session still live after the errors.
  std::uint64_t last = t1.tick;
  for (int i = 0; i < 5; ++i) {
    auto snap = core.tick();
    CHECK(snap.tick > last);
    last = snap.tick;
    CHECK(expect<protocol::StateSnapshot>(client->pop(1s)).tick == snap.tick);
  }
  CHECK(core.log().size() == 6);
  CHECK(core.log().entries()[0].command == SteerCommand{90, 5});

  core.disconnect(client);
  core.tick();
  CHECK_FALSE(client->pop(10ms).has_value());

  NetworkBank empty;
  CHECK_THROWS_AS(ServiceCore(s, empty), MissingModel);
}

TEST_CASE("service core: steering without a user object is refused") {
  NetworkBank bank;
  publish_constant(bank, 2);
  ServiceCore core(still_scenario(2), bank);
  auto client = core.connect();
  client->drain();
  core.handle(client, protocol::encode(SteerCommand{0, 1}));
  CHECK(expect<protocol::ErrorMessage>(client->pop(1s)).code == "no_user_object");
}

TEST_CASE("service core: a mark retrains and swaps the model in") {
  NetworkBank bank;
  publish_constant(bank, 2);
  ServiceCore core(still_scenario(2), bank);
  auto client = core.connect();
  for (int i = 0; i < 4; ++i) core.tick();
  client->drain();

  core.handle(client, protocol::encode(protocol::MarkHostile{1, 3}));
  core.tick();
  CHECK(await<protocol::RetrainStatus>(*client).phase == protocol::RetrainPhase::training);
  auto done = expect<protocol::RetrainStatus>(client->pop(5s));
  CHECK(done.phase == protocol::RetrainPhase::swapped);
  CHECK(done.version == 2);
  core.wait_idle();
  CHECK(bank.select(2)->version == 2);
  CHECK(bank.dataset(2)->groups.back().size() == 3);
  CHECK(core.tick().model_version == 2);
}

TEST_CASE("service core: a failed retrain reports an error and returns to idle") {
  NetworkBank bank;
  publish_constant(bank, 2, 1);  // too few records to split
  ServiceCore core(still_scenario(2), bank);
  auto client = core.connect();
  core.tick();
  client->drain();
  core.handle(client, protocol::encode(protocol::MarkHostile{2, 1}));
  core.tick();
  CHECK(await<protocol::RetrainStatus>(*client).phase == protocol::RetrainPhase::training);
  CHECK(await<protocol::ErrorMessage>(*client).code == "retrain");
  CHECK(expect<protocol::RetrainStatus>(client->pop(5s)).phase == protocol::RetrainPhase::idle);
  CHECK(bank.select(2)->version == 1);
}

TEST_CASE("tcp server: scripted client") {
  NetworkBank bank;
  publish_constant(bank, 2);
  Scenario s = still_scenario(2);
  s.trajectories[0].user_steered = true;
  ServiceCore core(s, bank);
  TcpServer server(core, "127.0.0.1:0");
  REQUIRE(server.port() != 0);
  server.start(10ms);

  Client c(server.port());
  auto first = c.receive_as<protocol::StateSnapshot>();
  CHECK(first.objects.size() == 2);
  c.send(SteerCommand{0, 2});

  // Malformed JSON: an error, and snapshots keep coming.
  c.send_raw(protocol::frame("not json"));
  CHECK(c.receive_as<protocol::ErrorMessage>().code == "parse");
  auto a = c.receive_as<protocol::StateSnapshot>();
  auto b = c.receive_as<protocol::StateSnapshot>();
  CHECK(b.tick > a.tick);
  CHECK(b.objects[0].x > first.objects[0].x);

  Client second(server.port());
  CHECK(second.receive_as<protocol::StateSnapshot>().tick >= a.tick);

  // An oversized frame is answered and the connection closes.
  Client rude(server.port());
  rude.send_raw(std::string("\x7f\x00\x00\x00", 4));
  CHECK(rude.receive_as<protocol::ErrorMessage>().code == "frame");
  bool closed = false;
  for (int i = 0; i < 2000 && !closed; ++i) closed = !rude.receive().has_value();
  CHECK(closed);

  CHECK(c.receive_as<protocol::StateSnapshot>().tick > b.tick);
  server.stop();
  CHECK_THROWS_AS(TcpServer(core, "256.0.0.1:1"), Error);
}
