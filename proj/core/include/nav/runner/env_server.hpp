// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nav/runner/wire.hpp"
#include "nav/world/world.hpp"

namespace nav::runner {

// TCP server for the environment protocol. One thread and one environment
// per connection.
class EnvServer {
 public:
  EnvServer(world::MazeLayout layout, world::EnvConfig env, bool raw_depth = false);
  ~EnvServer();
  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  // Binds and starts accepting. Port 0 picks a free port. Returns the port.
  int start(int port, const std::string& host = "127.0.0.1");
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();
  int port() const { return port_; }
  std::size_t sessions_started() const { return sessions_.load(); }

 private:
  void accept_loop();
  void session(int fd);

  world::MazeLayout layout_;
  world::EnvConfig env_;
  bool raw_depth_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> sessions_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

// Blocking client; one request, one response.
class EnvClient {
 public:
  EnvClient() = default;
  ~EnvClient();
  EnvClient(const EnvClient&) = delete;
  EnvClient& operator=(const EnvClient&) = delete;

  // Throws std::runtime_error when the connection fails.
  void connect(const std::string& host, int port);
  void close();

  // Throw wire::ProtocolError carrying the server's ERR code.
  wire::Obs reset(std::uint64_t seed);
  wire::Obs step(std::uint8_t action);

  void send_raw(std::span<const std::uint8_t> bytes);
  // Next message, or nullopt once the server closed the connection.
  std::optional<wire::Message> read_message();

 private:
  wire::Obs expect_obs();

  int fd_ = -1;
  std::vector<std::uint8_t> buf_;
};

}  // namespace nav::runner
