// SPDX-License-Identifier: Apache-2.0
#include "nav/runner/env_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "nav/errors.hpp"

namespace nav::runner {

namespace {

bool send_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

bool send_msg(int fd, const wire::Message& m) { return send_all(fd, wire::encode(m)); }

// Reads until one full frame is buffered. nullopt on orderly close or error.
std::optional<wire::Message> read_frame(int fd, std::vector<std::uint8_t>& buf) {
  for (;;) {
    std::size_t used = 0;
    auto m = wire::decode(buf, used);
    if (m) {
      buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(used));
      return m;
    }
    std::uint8_t chunk[65536];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buf.insert(buf.end(), chunk, chunk + n);
  }
}

}  // namespace

EnvServer::EnvServer(world::MazeLayout layout, world::EnvConfig env, bool raw_depth)
    : layout_(std::move(layout)), env_(std::move(env)), raw_depth_(raw_depth) {}

EnvServer::~EnvServer() { stop(); }

int EnvServer::start(int port, const std::string& host) {
  if (running_) throw UsageError("server already running");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw ConfigError("bad listen address " + host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void EnvServer::wait() {
  if (acceptor_.joinable()) acceptor_.join();
}

void EnvServer::stop() {
  if (!running_.exchange(false)) {
    if (acceptor_.joinable()) acceptor_.join();
    return;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable() && acceptor_.get_id() != std::this_thread::get_id()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  listen_fd_ = -1;
}

void EnvServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    ++sessions_;
    workers_.emplace_back([this, fd] { session(fd); });
  }
}

void EnvServer::session(int fd) {
  std::vector<std::uint8_t> buf;
  std::optional<world::MazeEnv> env;
  auto fail = [&](std::uint16_t code, const std::string& msg) { send_msg(fd, wire::make_err(code, msg)); };
  try {
    for (;;) {
      auto m = read_frame(fd, buf);
      if (!m) break;
      if (m->type == wire::MsgType::kReset) {
        const std::uint64_t seed = wire::parse_reset(*m);
        if (!env) env.emplace(layout_, env_);
        env->reset(seed);
        if (!send_msg(fd, wire::make_obs(wire::observation_from_env(*env, raw_depth_, true)))) break;
      } else if (m->type == wire::MsgType::kStep) {
        const std::uint8_t a = wire::parse_step(*m);
        if (!env) {
          fail(wire::kStepBeforeReset, "STEP before RESET");
          break;
        }
        if (a >= world::kNumActions) {
          fail(wire::kBadAction, "action " + std::to_string(a) + " out of range");
          break;
        }
        if (env->done()) {
          fail(wire::kStepAfterDone, "STEP after the episode finished");
          break;
        }
        env->step(world::Action{a});
        if (!send_msg(fd, wire::make_obs(wire::observation_from_env(*env, raw_depth_, false)))) break;
      } else {
        fail(wire::kMalformed, "clients may only send RESET or STEP");
        break;
      }
    }
  } catch (const wire::ProtocolError& e) {
    fail(e.code(), e.what());
  } catch (const std::exception& e) {
    fail(wire::kMalformed, e.what());
  }
  {
    std::lock_guard lock(mu_);
    client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd), client_fds_.end());
  }
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

EnvClient::~EnvClient() { close(); }

void EnvClient::connect(const std::string& host, int port) {
  close();
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("bad address " + host);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const std::string err = std::strerror(errno);
    close();
    throw std::runtime_error("connect " + host + ":" + std::to_string(port) + ": " + err);
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  buf_.clear();
}

void EnvClient::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void EnvClient::send_raw(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0 || !send_all(fd_, bytes)) throw std::runtime_error("send failed");
}

std::optional<wire::Message> EnvClient::read_message() {
  if (fd_ < 0) return std::nullopt;
  return read_frame(fd_, buf_);
}

wire::Obs EnvClient::expect_obs() {
  auto m = read_message();
  if (!m) throw std::runtime_error("connection closed by server");
  if (m->type == wire::MsgType::kErr) {
    const auto e = wire::parse_err(*m);
    throw wire::ProtocolError(e.code, e.message);
  }
  return wire::parse_obs(*m);
}

wire::Obs EnvClient::reset(std::uint64_t seed) {
  send_raw(wire::encode(wire::make_reset(seed)));
  return expect_obs();
}

wire::Obs EnvClient::step(std::uint8_t action) {
  send_raw(wire::encode(wire::make_step(action)));
  return expect_obs();
}

}  // namespace nav::runner
