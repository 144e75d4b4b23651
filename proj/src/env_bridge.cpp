#include "gpswarm/env_bridge.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <system_error>

#include "json.hpp"

namespace gpswarm::bridge {

using nlohmann::json;

namespace {

json obs_to_json(const Observation& o) {
  json img = json::array();
  for (int ch = 0; ch < 3; ++ch) {
    json rows = json::array();
    for (int r = 0; r < o.rows; ++r) {
      json row = json::array();
      for (int c = 0; c < o.cols; ++c) row.push_back(o.at(ch, r, c));
      rows.push_back(std::move(row));
    }
    img.push_back(std::move(rows));
  }
  return img;
}

Observation obs_from_json(const json& img, const json& vel) {
  if (!img.is_array() || img.size() != 3) throw ProtocolError("obs must have 3 channels");
  const auto& first = img.at(0);
  if (!first.is_array() || first.empty() || !first.at(0).is_array())
    throw ProtocolError("obs channel must be a 2-D array");
  Observation o(static_cast<int>(first.size()), static_cast<int>(first.at(0).size()));
  for (int ch = 0; ch < 3; ++ch) {
    const auto& rows = img.at(ch);
    if (!rows.is_array() || static_cast<int>(rows.size()) != o.rows) throw ProtocolError("ragged obs");
    for (int r = 0; r < o.rows; ++r) {
      const auto& row = rows.at(r);
      if (!row.is_array() || static_cast<int>(row.size()) != o.cols) throw ProtocolError("ragged obs");
      for (int c = 0; c < o.cols; ++c) o.at(ch, r, c) = row.at(c).get<double>();
    }
  }
  if (!vel.is_array() || vel.size() != 2) throw ProtocolError("vel entries must have 2 numbers");
  o.velocity = {vel.at(0).get<double>(), vel.at(1).get<double>()};
  return o;
}

json parse_object(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("not a JSON object");
  return j;
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::system_error(errno, std::generic_category(), "send");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::optional<std::string> read_line_from(int fd, std::string& buffer) {
  for (;;) {
    if (const auto nl = buffer.find('\n'); nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string serialize(const Request& r) {
  json j;
  j["cmd"] = r.cmd;
  if (r.seed) j["seed"] = *r.seed;
  if (r.actions) {
    json a = json::array();
    for (const auto& act : *r.actions) a.push_back(act);
    j["actions"] = std::move(a);
  }
  return j.dump();
}

std::string serialize(const Response& r) {
  json j;
  j["ok"] = r.ok;
  if (r.version) j["v"] = *r.version;
  if (r.config) j["config"] = *r.config;
  if (r.observations) {
    json obs = json::array(), vel = json::array();
    for (const auto& o : *r.observations) {
      obs.push_back(obs_to_json(o));
      vel.push_back({o.velocity.x(), o.velocity.y()});
    }
    j["obs"] = std::move(obs);
    j["vel"] = std::move(vel);
  }
  if (r.reward) j["reward"] = *r.reward;
  if (r.done) j["done"] = *r.done;
  if (r.info)
    j["info"] = {{"collision_aa", r.info->collision_aa},
                 {"collision_ao", r.info->collision_ao},
                 {"distances", r.info->distances}};
  if (r.err) j["err"] = *r.err;
  return j.dump();
}

Request parse_request(std::string_view line) {
  const json j = parse_object(line);
  Request r;
  try {
    r.cmd = j.at("cmd").get<std::string>();
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        throw ProtocolError("seed must be a non-negative integer");
      r.seed = s.get<std::uint64_t>();
    }
    if (j.contains("actions")) {
      const auto& a = j.at("actions");
      if (!a.is_array()) throw ProtocolError("actions must be an array");
      std::vector<std::vector<double>> acts;
      for (const auto& item : a) {
        if (!item.is_array()) throw ProtocolError("action must be an array");
        std::vector<double> row;
        for (const auto& v : item) {
          if (!v.is_number()) throw ProtocolError("action components must be numbers");
          row.push_back(v.get<double>());
        }
        acts.push_back(std::move(row));
      }
      r.actions = std::move(acts);
    }
  } catch (const json::exception& e) {
    throw ProtocolError(e.what());
  }
  return r;
}

Response parse_response(std::string_view line) {
  const json j = parse_object(line);
  Response r;
  try {
    r.ok = j.at("ok").get<bool>();
    if (j.contains("v")) r.version = j.at("v").get<int>();
    if (j.contains("config")) r.config = j.at("config").get<std::map<std::string, double>>();
    if (j.contains("obs") != j.contains("vel")) throw ProtocolError("obs and vel must travel together");
    if (j.contains("obs")) {
      const auto& obs = j.at("obs");
      const auto& vel = j.at("vel");
      if (!obs.is_array() || !vel.is_array() || obs.size() != vel.size())
        throw ProtocolError("obs/vel agent count mismatch");
      std::vector<Observation> out;
      for (std::size_t i = 0; i < obs.size(); ++i) out.push_back(obs_from_json(obs[i], vel[i]));
      r.observations = std::move(out);
    }
    if (j.contains("reward")) r.reward = j.at("reward").get<double>();
    if (j.contains("done")) r.done = j.at("done").get<bool>();
    if (j.contains("info")) {
      const auto& i = j.at("info");
      r.info = WireInfo{i.at("collision_aa").get<bool>(), i.at("collision_ao").get<bool>(),
                        i.at("distances").get<std::vector<double>>()};
    }
    if (j.contains("err")) r.err = j.at("err").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(e.what());
  }
  return r;
}

std::map<std::string, double> config_echo(const EnvConfig& cfg) {
  return {{"N", cfg.num_agents},
          {"M", cfg.num_targets},
          {"O", cfg.num_obstacles},
          {"H", cfg.raster},
          {"W", cfg.raster},
          {"episode_len", cfg.episode_len},
          {"a_max", cfg.a_max}};
}

Session::Session(EnvConfig cfg, std::shared_ptr<const BasisSet> basis)
    : env_(std::move(cfg), std::move(basis)) {}

Response Session::observation_response(const std::vector<Observation>& obs) const {
  Response r;
  r.observations = obs;
  return r;
}

Response Session::handle(const Request& req) {
  if (req.cmd == "hello") {
    Response r;
    r.version = kProtocolVersion;
    r.config = config_echo(env_.config());
    return r;
  }
  if (req.cmd == "close") {
    closed_ = true;
    return Response{};
  }
  if (req.cmd == "reset") {
    if (!req.seed) return Response::error("parse");
    return observation_response(env_.reset(*req.seed));
  }
  if (req.cmd == "step") {
    if (!env_.started()) return Response::error("order");
    if (env_.done()) return Response::error("done");
    if (!req.actions || static_cast<int>(req.actions->size()) != env_.config().num_agents)
      return Response::error("arity");
    std::vector<Vec2> actions;
    for (const auto& a : *req.actions) {
      if (a.size() != 2) return Response::error("arity");
      if (!std::isfinite(a[0]) || !std::isfinite(a[1])) return Response::error("parse");
      actions.emplace_back(a[0], a[1]);
    }
    const StepResult s = env_.step(actions);
    Response r = observation_response(s.observations);
    r.reward = s.reward;
    r.done = s.done;
    r.info = WireInfo{s.info.collision_aa, s.info.collision_ao, s.info.target_distances};
    return r;
  }
  return Response::error("parse");
}

std::string Session::handle_line(std::string_view line) {
  try {
    return serialize(handle(parse_request(line)));
  } catch (const ProtocolError&) {
    return serialize(Response::error("parse"));
  }
}

Server::Server(EnvConfig cfg, std::shared_ptr<const BasisSet> basis, int port, Logger log)
    : cfg_(std::move(cfg)), basis_(std::move(basis)), log_(std::move(log)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 4) < 0) {
    const int err = errno;
    ::close(listen_fd_);
    throw std::system_error(err, std::generic_category(), "bind port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Server::~Server() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::stop() {
  stopping_ = true;
  ::shutdown(listen_fd_, SHUT_RDWR);
}

void Server::run(int max_sessions) {
  int served = 0;
  while (!stopping_ && (max_sessions < 0 || served < max_sessions)) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (stopping_) break;
      throw std::system_error(errno, std::generic_category(), "accept");
    }
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    serve_client(fd, ++served);
    ::close(fd);
  }
}

void Server::serve_client(int fd, int session_id) {
  auto log = [&](const std::string& msg) {
    if (log_) log_("session " + std::to_string(session_id) + ": " + msg);
  };
  log("open");
  Session session(cfg_, basis_);
  std::string buffer;
  int requests = 0;
  try {
    while (!session.closed()) {
      auto line = read_line_from(fd, buffer);
      if (!line) break;
      write_all(fd, session.handle_line(*line) + "\n");
      ++requests;
    }
  } catch (const std::system_error& e) {
    log(std::string("stream error: ") + e.what());
  }
  log(std::string(session.closed() ? "closed" : "disconnected") + " after " +
      std::to_string(requests) + " requests");
}

LineClient::LineClient(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve " + host);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
  const int err = errno;
  ::freeaddrinfo(res);
  if (rc < 0) {
    if (fd_ >= 0) ::close(fd_);
    throw std::system_error(err, std::generic_category(), "connect");
  }
  const int yes = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
}

LineClient::~LineClient() {
  if (fd_ >= 0) ::close(fd_);
}

void LineClient::send_line(std::string_view line) {
  std::string msg(line);
  msg.push_back('\n');
  write_all(fd_, msg);
}

std::optional<std::string> LineClient::read_line() { return read_line_from(fd_, buffer_); }

std::string LineClient::request(std::string_view line) {
  send_line(line);
  auto reply = read_line();
  if (!reply) throw std::runtime_error("server closed connection");
  return *reply;
}

}  // namespace gpswarm::bridge
