#pragma once
// Console gateway: newline-delimited JSON over plain TCP. One I/O thread
// serves every client; the tick loop only ever touches two queues (events
// out, commands in) and never blocks on the network.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <deque>
#include <list>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pyrewatch/error.hpp"

namespace pyrewatch::gateway {

using nlohmann::json;

inline constexpr std::size_t kDefaultQueueCap = 10'000;
inline constexpr std::size_t kMaxCommandBytes = 64 * 1024;

class Server {
 public:
  explicit Server(std::size_t queue_cap = kDefaultQueueCap) : cap_(queue_cap) {}
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  // Binds and starts the I/O thread. Port 0 picks a free port; the bound port
  // is returned.
  std::uint16_t start(std::uint16_t port, const std::string& host = "127.0.0.1") {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::Internal, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      close_fd(listen_fd_);
      throw Error(ErrorCode::Usage, "bad listen address " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
      const std::string why = std::strerror(errno);
      close_fd(listen_fd_);
      throw Error(ErrorCode::Internal, "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    set_nonblocking(listen_fd_);
    if (::pipe(wake_) < 0) throw Error(ErrorCode::Internal, std::string("pipe: ") + std::strerror(errno));
    set_nonblocking(wake_[0]);
    set_nonblocking(wake_[1]);
    running_ = true;
    io_ = std::thread([this] { loop(); });
    return ntohs(addr.sin_port);
  }

  void stop() {
    if (!running_.exchange(false)) return;
    wake();
    if (io_.joinable()) io_.join();
    std::lock_guard lock(mu_);
    for (auto& c : clients_) close_fd(c.fd);
    clients_.clear();
    close_fd(listen_fd_);
    close_fd(wake_[0]);
    close_fd(wake_[1]);
  }

  // Queues one event line (without the trailing newline) for every client.
  // With nobody connected it goes to a backlog that the next client receives.
  void publish(const std::string& line) {
    {
      std::lock_guard lock(mu_);
      if (clients_.empty()) {
        push_capped(backlog_, line + "\n");
      } else {
        for (auto& c : clients_) push_client(c, line + "\n");
      }
    }
    wake();
  }

  // Commands received since the last call, in arrival order.
  std::vector<json> take_commands() {
    std::lock_guard lock(mu_);
    return std::exchange(commands_, {});
  }

  std::size_t client_count() const {
    std::lock_guard lock(mu_);
    return clients_.size();
  }
  std::size_t backlog_size() const {
    std::lock_guard lock(mu_);
    return backlog_.size();
  }
  std::uint64_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

  // True once every queued line has been written to every client.
  bool drained() const {
    std::lock_guard lock(mu_);
    for (const auto& c : clients_) {
      if (!c.out.empty()) return false;
    }
    return true;
  }

  bool wait_drained(std::chrono::milliseconds timeout) const {
    const auto until = std::chrono::steady_clock::now() + timeout;
    while (!drained()) {
      if (std::chrono::steady_clock::now() > until) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return true;
  }

 private:
  struct Client {
    int fd = -1;
    std::deque<std::string> out;
    std::size_t offset = 0;  // bytes of out.front() already written
    std::string in;
  };

  static void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }

  void push_capped(std::deque<std::string>& q, std::string line) {
    q.push_back(std::move(line));
    while (q.size() > cap_) {
      q.pop_front();
      ++dropped_;
    }
  }

  // Never drops a line that is half written.
  void push_client(Client& c, std::string line) {
    c.out.push_back(std::move(line));
    while (c.out.size() > cap_) {
      c.out.erase(c.out.begin() + (c.offset > 0 ? 1 : 0));
      ++dropped_;
    }
  }

  void wake() {
    if (wake_[1] >= 0) {
      const char b = 1;
      [[maybe_unused]] auto n = ::write(wake_[1], &b, 1);
    }
  }

  void loop() {
    std::vector<pollfd> fds;
    while (running_) {
      fds.clear();
      fds.push_back({listen_fd_, POLLIN, 0});
      fds.push_back({wake_[0], POLLIN, 0});
      {
        std::lock_guard lock(mu_);
        for (const auto& c : clients_) {
          fds.push_back({c.fd, static_cast<short>(POLLIN | (c.out.empty() ? 0 : POLLOUT)), 0});
        }
      }
      if (::poll(fds.data(), fds.size(), 200) < 0) {
        if (errno == EINTR) continue;
        break;
      }
      if (fds[1].revents & POLLIN) {
        char buf[256];
        while (::read(wake_[0], buf, sizeof buf) > 0) {
        }
      }
      if (fds[0].revents & POLLIN) accept_all();
      std::lock_guard lock(mu_);
      for (std::size_t k = 2; k < fds.size(); ++k) {
        auto it = std::find_if(clients_.begin(), clients_.end(), [&](const Client& c) { return c.fd == fds[k].fd; });
        if (it == clients_.end()) continue;
        bool alive = true;
        if (fds[k].revents & (POLLIN | POLLHUP | POLLERR)) alive = read_client(*it);
        if (alive && (fds[k].revents & POLLOUT)) alive = write_client(*it);
        if (!alive) {
          close_fd(it->fd);
          clients_.erase(it);
        }
      }
    }
  }

  void accept_all() {
    while (true) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      set_nonblocking(fd);
      std::lock_guard lock(mu_);
      Client c;
      c.fd = fd;
      c.out = std::exchange(backlog_, {});
      clients_.push_back(std::move(c));
    }
  }

  bool read_client(Client& c) {
    char buf[4096];
    while (true) {
      const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
      if (n == 0) return false;
      if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK;
      c.in.append(buf, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = c.in.find('\n')) != std::string::npos) {
        std::string line = c.in.substr(0, nl);
        c.in.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
          commands_.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
          json reply{{"type", "notice"}, {"tick", nullptr}, {"data", {{"what", std::string("malformed command: ") + e.what()}}}};
          push_client(c, reply.dump() + "\n");
        }
      }
      if (c.in.size() > kMaxCommandBytes) return false;
    }
  }

  bool write_client(Client& c) {
    while (!c.out.empty()) {
      const std::string& s = c.out.front();
      const ssize_t n = ::send(c.fd, s.data() + c.offset, s.size() - c.offset, MSG_NOSIGNAL);
      if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK;
      c.offset += static_cast<std::size_t>(n);
      if (c.offset < s.size()) return true;
      c.out.pop_front();
      c.offset = 0;
    }
    return true;
  }

  std::size_t cap_;
  int listen_fd_ = -1;
  int wake_[2] = {-1, -1};
  std::atomic<bool> running_{false};
  std::thread io_;
  mutable std::mutex mu_;
  std::list<Client> clients_;
  std::deque<std::string> backlog_;
  std::vector<json> commands_;
  std::uint64_t dropped_ = 0;
};

}  // namespace pyrewatch::gateway
