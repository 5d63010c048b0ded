#include <softchain/wire.hpp>

#include <json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace softchain {

using nlohmann::json;

namespace {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json error_response(const std::string& message) { return json{{"ok", false}, {"error", message}}; }

template <std::size_t N>
json to_array(const std::array<double, N>& v) {
  return json(std::vector<double>(v.begin(), v.end()));
}

double number(const json& j, const char* key) {
  if (!j.is_number()) throw ProtocolError(std::string("'") + key + "' must be a number");
  return j.get<double>();
}

bool boolean(const json& j, const char* key) {
  if (!j.is_boolean()) throw ProtocolError(std::string("'") + key + "' must be a boolean");
  return j.get<bool>();
}

void apply_perturbation(const json& j, PerturbationSchedule& p) {
  if (j.is_boolean()) {
    p.enabled = j.get<bool>();
    return;
  }
  if (!j.is_object()) throw ProtocolError("'perturb' must be a boolean or an object");
  p.enabled = true;
  for (const auto& [k, v] : j.items()) {
    if (k == "onset") p.onset = number(v, "onset");
    else if (k == "on") p.on = number(v, "on");
    else if (k == "off") p.off = number(v, "off");
    else if (k == "magnitude") p.magnitude = number(v, "magnitude");
    else throw ProtocolError("unknown perturb field '" + k + "'");
  }
}

EpisodeConfig parse_config(const json& j) {
  EpisodeConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw ProtocolError("'config' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "box") {
      if (!v.is_object()) throw ProtocolError("'box' must be an object");
      for (const auto& [bk, bv] : v.items()) {
        if (bk == "size") {
          if (!bv.is_array() || bv.size() != 3) throw ProtocolError("'box.size' must be 3 numbers");
          for (int i = 0; i < 3; ++i) cfg.box.size[i] = number(bv[i], "box.size");
        } else if (bk == "mass") {
          cfg.box.mass = number(bv, "box.mass");
        } else if (bk == "friction") {
          cfg.box.friction = number(bv, "box.friction");
        } else {
          throw ProtocolError("unknown box field '" + bk + "'");
        }
      }
    } else if (k == "randomize_pose") {
      cfg.randomize_pose = boolean(v, "randomize_pose");
    } else if (k == "offset_x") {
      cfg.offset_x = number(v, "offset_x");
    } else if (k == "yaw") {
      cfg.yaw = number(v, "yaw");
    } else if (k == "max_offset_x") {
      cfg.max_offset_x = number(v, "max_offset_x");
    } else if (k == "max_yaw") {
      cfg.max_yaw = number(v, "max_yaw");
    } else if (k == "max_steps") {
      if (!v.is_number_integer()) throw ProtocolError("'max_steps' must be an integer");
      cfg.max_steps = v.get<int>();
    } else if (k == "perturb") {
      apply_perturbation(v, cfg.perturbation);
    } else {
      throw ProtocolError("unknown config field '" + k + "'");
    }
  }
  return cfg;
}

}  // namespace

WireSession::WireSession(RobotModel model) : model_(std::move(model)) {}

std::string WireSession::handle(const std::string& line) {
  json response;
  try {
    json req;
    try {
      req = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("parse error: ") + e.what());
    }
    if (!req.is_object()) throw ProtocolError("request must be a JSON object");
    if (!req.contains("op") || !req["op"].is_string()) throw ProtocolError("request needs a string 'op'");
    const std::string op = req["op"];

    if (op == "hello") {
      response = {{"ok", true}, {"version", kWireVersion}, {"obs_dim", kObsDim}, {"act_dim", kActDim}};
    } else if (op == "reset") {
      std::uint64_t seed = 0;
      if (req.contains("seed")) {
        if (!req["seed"].is_number_unsigned())
          throw ProtocolError("'seed' must be a non-negative integer");
        seed = req["seed"].get<std::uint64_t>();
      }
      if (req.contains("reward")) {
        if (!req["reward"].is_string()) throw ProtocolError("'reward' must be a string");
        scheme_ = parse_reward_scheme(req["reward"].get<std::string>());
      }
      const EpisodeConfig cfg = parse_config(req.value("config", json()));
      if (!env_ || env_->scheme() != scheme_) env_ = std::make_unique<Environment>(model_, scheme_);
      const Observation obs = env_->reset(cfg, seed);
      response = {{"ok", true},
                  {"obs", to_array(obs.normalized)},
                  {"info",
                   {{"reference", to_array(env_->reference())}, {"outcome", "none"}, {"step", 0}}}};
    } else if (op == "step") {
      if (!env_) throw ProtocolError("step before reset");
      if (env_->done()) throw ProtocolError("episode is over; reset required");
      if (!req.contains("action") || !req["action"].is_array())
        throw ProtocolError("'action' must be an array of 13 numbers");
      const json& a = req["action"];
      if (a.size() != static_cast<std::size_t>(kActDim))
        throw ProtocolError("action must have length 13, got " + std::to_string(a.size()));
      ActionVector action;
      for (int i = 0; i < kActDim; ++i) action[i] = number(a[i], "action");
      const StepResult r = env_->step(action);
      json info = {{"reference", to_array(r.info.reference)},
                   {"outcome", outcome_name(r.info.outcome)},
                   {"step", env_->step_count()},
                   {"phase", phase_name(r.info.phase)},
                   {"contacts", r.info.contacts},
                   {"perturbed", r.info.perturbed}};
      if (!r.info.error.empty()) info["error"] = r.info.error;
      response = {{"ok", true},
                  {"obs", to_array(r.observation.normalized)},
                  {"reward", r.reward},
                  {"terminated", r.terminated},
                  {"truncated", r.truncated},
                  {"info", info}};
    } else if (op == "close") {
      env_.reset();
      closed_ = true;
      response = {{"ok", true}};
    } else {
      throw ProtocolError("unknown op '" + op + "'");
    }
  } catch (const std::exception& e) {
    response = error_response(e.what());
  }
  return response.dump();
}

void serve_stream(const RobotModel& model, std::istream& in, std::ostream& out) {
  WireSession session(model);
  std::string line;
  while (!session.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << session.handle(line) << '\n' << std::flush;
  }
}

// ---------------------------------------------------------------------------------------------

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

// Appends to `buffer` until it holds a full line; false on EOF or error.
bool read_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    const auto pos = buffer.find('\n');
    if (pos != std::string::npos) {
      line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

TcpServer::TcpServer(RobotModel model) : model_(std::move(model)) {}

TcpServer::~TcpServer() {
  stop();
  for (auto& t : threads_)
    if (t.joinable()) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

int TcpServer::listen(int port, const std::string& host) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::invalid_argument("bad listen address '" + host + "'");
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
    throw std::runtime_error("bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  if (::listen(listen_fd_, 64) < 0) throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void TcpServer::run() {
  if (listen_fd_ < 0) throw std::logic_error("TcpServer::run before listen");
  while (!stop_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(mutex_);
    clients_.push_back(fd);
    threads_.emplace_back([this, fd] { session(fd); });
  }
}

void TcpServer::stop() {
  stop_ = true;
  std::lock_guard lock(mutex_);
  for (int fd : clients_) ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::session(int fd) {
  {
    WireSession s(model_);
    std::string buffer, line;
    while (!s.closed() && !stop_ && read_line(fd, buffer, line))
      if (!send_all(fd, s.handle(line) + '\n')) break;
  }
  std::lock_guard lock(mutex_);
  std::erase(clients_, fd);
  ::close(fd);
}

TcpClient::TcpClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::invalid_argument("bad address '" + host + "'");
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    throw std::runtime_error("connect " + host + ":" + std::to_string(port) + ": " + msg);
  }
}

TcpClient::~TcpClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string TcpClient::request(const std::string& line) {
  if (!send_all(fd_, line + '\n')) throw std::runtime_error("send failed for request: " + line);
  std::string response;
  if (!read_line(fd_, buffer_, response)) throw std::runtime_error("connection closed after request: " + line);
  return response;
}

}  // namespace softchain
