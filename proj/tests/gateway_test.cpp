#include "pyrewatch/gateway.hpp"

#include <gtest/gtest.h>

#include "pyrewatch/simengine.hpp"

using namespace pyrewatch;
using namespace std::chrono_literals;

namespace {

// Minimal blocking line client.
class Client {
 public:
  explicit Client(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) throw std::runtime_error("connect failed");
    timeval tv{5, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~Client() { ::close(fd_); }

  void send(const std::string& s) { ASSERT_EQ(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL), (ssize_t)s.size()); }

  // Empty string on timeout or close.
  std::string line() {
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string l = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return l;
      }
      char tmp[4096];
      const ssize_t n = ::recv(fd_, tmp, sizeof tmp, 0);
      if (n <= 0) return {};
      buf_.append(tmp, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> lines(std::size_t n) {
    std::vector<std::string> out;
    while (out.size() < n) {
      auto l = line();
      if (l.empty()) break;
      out.push_back(std::move(l));
    }
    return out;
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

template <class Pred>
bool eventually(Pred p, std::chrono::milliseconds limit = 3000ms) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (!p()) {
    if (std::chrono::steady_clock::now() > until) return false;
    std::this_thread::sleep_for(2ms);
  }
  return true;
}

}  // namespace

TEST(Gateway, PublishReachesClient) {
  gateway::Server s;
  const auto port = s.start(0);
  ASSERT_GT(port, 0);
  Client c(port);
  ASSERT_TRUE(eventually([&] { return s.client_count() == 1; }));
  s.publish(R"({"type":"hello","tick":0,"data":{}})");
  EXPECT_EQ(c.line(), R"({"type":"hello","tick":0,"data":{}})");
}

TEST(Gateway, BacklogFlushesToFirstClient) {
  gateway::Server s;
  const auto port = s.start(0);
  for (int i = 0; i < 50; ++i) s.publish(std::to_string(i));
  EXPECT_EQ(s.backlog_size(), 50u);
  Client c(port);
  const auto got = c.lines(50);
  ASSERT_EQ(got.size(), 50u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(got[i], std::to_string(i));
  EXPECT_EQ(s.backlog_size(), 0u);
}

TEST(Gateway, BacklogIsCappedDroppingOldest) {
  gateway::Server s(100);
  const auto port = s.start(0);
  for (int i = 0; i < 250; ++i) s.publish(std::to_string(i));
  EXPECT_EQ(s.backlog_size(), 100u);
  EXPECT_EQ(s.dropped(), 150u);
  Client c(port);
  const auto got = c.lines(100);
  ASSERT_EQ(got.size(), 100u);
  EXPECT_EQ(got.front(), "150");
  EXPECT_EQ(got.back(), "249");
}

TEST(Gateway, DefaultCapIsTenThousand) {
  gateway::Server s;
  s.start(0);
  for (int i = 0; i < 10'005; ++i) s.publish("x");
  EXPECT_EQ(s.backlog_size(), 10'000u);
  EXPECT_EQ(s.dropped(), 5u);
}

TEST(Gateway, CommandsArriveInOrder) {
  gateway::Server s;
  const auto port = s.start(0);
  Client c(port);
  std::string burst;
  for (int i = 0; i < 20; ++i) burst += json{{"type", "snapshot"}, {"n", i}}.dump() + "\n";
  // Split awkwardly so lines straddle reads.
  c.send(burst.substr(0, 37));
  std::this_thread::sleep_for(20ms);
  c.send(burst.substr(37));
  std::vector<json> got;
  ASSERT_TRUE(eventually([&] {
    for (auto& j : s.take_commands()) got.push_back(std::move(j));
    return got.size() >= 20;
  }));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(got[i]["n"], i);
}

TEST(Gateway, MalformedCommandGetsNotice) {
  gateway::Server s;
  const auto port = s.start(0);
  Client c(port);
  c.send("{not json\n");
  const auto reply = json::parse(c.line());
  EXPECT_EQ(reply["type"], "notice");
  EXPECT_TRUE(reply["tick"].is_null());
  EXPECT_NE(reply["data"]["what"].get<std::string>().find("malformed"), std::string::npos);
  EXPECT_TRUE(s.take_commands().empty());
  c.send("{\"type\":\"pause\"}\n");
  ASSERT_TRUE(eventually([&] { return s.take_commands().size() == 1; }));
}

TEST(Gateway, OversizedCommandDropsClient) {
  gateway::Server s;
  const auto port = s.start(0);
  Client c(port);
  ASSERT_TRUE(eventually([&] { return s.client_count() == 1; }));
  c.send(std::string(gateway::kMaxCommandBytes + 10, 'a'));
  EXPECT_TRUE(eventually([&] { return s.client_count() == 0; }));
}

TEST(Gateway, DisconnectedClientDoesNotStallPublishing) {
  gateway::Server s;
  const auto port = s.start(0);
  {
    Client c(port);
    ASSERT_TRUE(eventually([&] { return s.client_count() == 1; }));
  }
  ASSERT_TRUE(eventually([&] { return s.client_count() == 0; }));
  s.publish("after");
  Client d(port);
  EXPECT_EQ(d.line(), "after");
}

TEST(Gateway, TwoClientsBothReceive) {
  gateway::Server s;
  const auto port = s.start(0);
  Client a(port), b(port);
  ASSERT_TRUE(eventually([&] { return s.client_count() == 2; }));
  s.publish("one");
  EXPECT_EQ(a.line(), "one");
  EXPECT_EQ(b.line(), "one");
}

TEST(Gateway, StopIsIdempotent) {
  gateway::Server s;
  s.start(0);
  s.stop();
  s.stop();
}

// A live engine over the socket delivers exactly what replaying its log gives.
TEST(Gateway, LiveStreamMatchesReplay) {
  auto sc = sim::parse_scenario(json::parse(R"({
    "name": "wire", "seed": 11, "max_ticks": 400,
    "origin": {"lat_deg": 1.0, "lon_deg": 2.0},
    "entities": [{"id": 1, "label": "dog", "x_m": 4, "y_m": 3, "z_m": 0.3, "radius_m": 0.3}],
    "drone": {"area": {"x0_m": 0, "y0_m": 0, "x1_m": 8, "y1_m": 8}}
  })"));
  sim::Engine engine(sc);
  gateway::Server s;
  const auto port = s.start(0);
  Client c(port);
  ASSERT_TRUE(eventually([&] { return s.client_count() == 1; }));

  std::string log;
  std::size_t published = 0;
  engine.on_log([&](const std::string& l) { log += l + "\n"; });
  engine.on_event([&](const std::string& l) {
    s.publish(l);
    ++published;
  });
  int i = 0;
  while (engine.step()) {
    if (++i == 3) c.send("{\"type\":\"snapshot\"}\n");
    for (auto& cmd : s.take_commands()) engine.submit(std::move(cmd));
  }
  ASSERT_TRUE(s.wait_drained(5s));
  const auto wire = c.lines(published);
  ASSERT_EQ(wire.size(), published);
  std::istringstream in(log);
  EXPECT_EQ(wire, sim::replay_lines(in));
}
