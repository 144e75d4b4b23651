#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gpswarm/swarm_env.hpp"

namespace gpswarm::bridge {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kDefaultPort = 7355;

/// One JSON object per line, e.g. {"cmd":"step","actions":[[0.1,0],[0,0]]}.
struct Request {
  std::string cmd;  // hello | reset | step | close
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::vector<double>>> actions;  // N rows, 2 each when valid

  bool operator==(const Request&) const = default;
};

struct WireInfo {
  bool collision_aa = false;
  bool collision_ao = false;
  std::vector<double> distances;

  bool operator==(const WireInfo&) const = default;
};

/// `observations` travels as "obs" (N x 3 x H x W nested arrays) plus
/// "vel" (N x 2); both keys are present or neither.
struct Response {
  bool ok = true;
  std::optional<int> version;
  std::optional<std::map<std::string, double>> config;
  std::optional<std::vector<Observation>> observations;
  std::optional<double> reward;
  std::optional<bool> done;
  std::optional<WireInfo> info;
  std::optional<std::string> err;

  bool operator==(const Response&) const = default;
  static Response error(std::string code) {
    Response r;
    r.ok = false;
    r.err = std::move(code);
    return r;
  }
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize(const Request& r);
std::string serialize(const Response& r);
/// Both throw ProtocolError on malformed input.
Request parse_request(std::string_view line);
Response parse_response(std::string_view line);

/// Config echo sent in the hello response.
std::map<std::string, double> config_echo(const EnvConfig& cfg);

/// One client's view of an environment. Errors never end the session;
/// only "close" does.
class Session {
 public:
  Session(EnvConfig cfg, std::shared_ptr<const BasisSet> basis);

  Response handle(const Request& req);
  std::string handle_line(std::string_view line);
  bool closed() const { return closed_; }

 private:
  Response observation_response(const std::vector<Observation>& obs) const;

  SwarmEnv env_;
  bool closed_ = false;
};

using Logger = std::function<void(const std::string&)>;

/// Blocking TCP server; one session at a time, sessions served in order.
class Server {
 public:
  /// Binds and listens immediately; port 0 picks an ephemeral port.
  /// Throws std::system_error if the port is unavailable.
  Server(EnvConfig cfg, std::shared_ptr<const BasisSet> basis, int port, Logger log = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  /// Accept and serve sessions until stop() or `max_sessions` (if >= 0) are done.
  void run(int max_sessions = -1);
  void stop();

 private:
  void serve_client(int fd, int session_id);

  EnvConfig cfg_;
  std::shared_ptr<const BasisSet> basis_;
  Logger log_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
};

/// Minimal blocking line client, used by tests and tooling.
class LineClient {
 public:
  LineClient(const std::string& host, int port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  void send_line(std::string_view line);
  /// Returns std::nullopt when the server closed the stream.
  std::optional<std::string> read_line();
  std::string request(std::string_view line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace gpswarm::bridge
