#pragma once

#include <softchain/env.hpp>
#include <softchain/model.hpp>

#include <atomic>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace softchain {

inline constexpr int kWireVersion = 1;

/// One protocol session: one environment, strict request/response alternation. Requests and
/// responses are single-line JSON objects.
///
///   {"op":"hello"}
///   {"op":"reset","seed":7,"reward":"guided","config":{...}}
///   {"op":"step","action":[13 numbers]}
///   {"op":"close"}
///
/// Config overrides: box {size, mass, friction}, randomize_pose, offset_x, yaw, max_offset_x,
/// max_yaw, max_steps, perturb (bool or {onset, on, off, magnitude}).
class WireSession {
 public:
  explicit WireSession(RobotModel model);

  /// Response line without the trailing newline. Never throws for bad input.
  std::string handle(const std::string& line);
  bool closed() const { return closed_; }

 private:
  RobotModel model_;
  std::unique_ptr<Environment> env_;
  RewardScheme scheme_ = RewardScheme::Guided;
  bool closed_ = false;
};

/// Reads requests line by line until EOF or a close request.
void serve_stream(const RobotModel& model, std::istream& in, std::ostream& out);

/// Line protocol over TCP, one thread and one session per connection.
class TcpServer {
 public:
  explicit TcpServer(RobotModel model);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and listens; port 0 picks a free port. Returns the bound port.
  int listen(int port, const std::string& host = "127.0.0.1");
  /// Accepts connections until stop().
  void run();
  void stop();

 private:
  void session(int fd);

  RobotModel model_;
  int listen_fd_ = -1;
  std::atomic<bool> stop_{false};
  std::mutex mutex_;
  std::vector<int> clients_;
  std::vector<std::thread> threads_;
};

/// Blocking line-oriented client, used by tests and tooling.
class TcpClient {
 public:
  TcpClient(const std::string& host, int port);
  ~TcpClient();
  TcpClient(const TcpClient&) = delete;
  TcpClient& operator=(const TcpClient&) = delete;

  /// Sends one line and returns the response line; throws std::runtime_error on transport failure.
  std::string request(const std::string& line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace softchain
