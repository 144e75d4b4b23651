#include "gpswarm/env_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace gpswarm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

namespace detail {

double parse_double(const KeyValues& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& s = it->second;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config key '" + key + "': not a number: " + s);
  return v;
}

long long parse_int(const KeyValues& kv, const std::string& key, long long fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& s = it->second;
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config key '" + key + "': not an integer: " + s);
  return v;
}

}  // namespace detail

void EnvConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (!(workspace.width() > 0.0 && workspace.height() > 0.0))
    throw ConfigError("workspace must have positive extent");
  if (num_agents < 1) throw ConfigError("num_agents must be >= 1");
  if (num_targets < 1) throw ConfigError("num_targets must be >= 1");
  if (num_obstacles < 0) throw ConfigError("num_obstacles must be >= 0");
  positive(agent_radius, "agent_radius");
  positive(target_radius, "target_radius");
  positive(obstacle_radius, "obstacle_radius");
  positive(v_max, "v_max");
  positive(a_max, "a_max");
  positive(dt, "dt");
  if (!(damping >= 0.0 && damping * dt < 1.0)) throw ConfigError("damping * dt must be in [0, 1)");
  positive(d_comm, "d_comm");
  if (episode_len < 1) throw ConfigError("episode_len must be >= 1");
  positive(d_char, "d_char");
  if (!(amplitude >= 0.0)) throw ConfigError("amplitude must be non-negative");
  for (double a : amplitudes)
    if (!(a >= 0.0)) throw ConfigError("amplitudes must be non-negative");
  positive(intensity_scale, "intensity_scale");
  if (!(sigma_n >= 0.0)) throw ConfigError("sigma_n must be non-negative");
  if (raster < 8) throw ConfigError("raster must be >= 8");
  if (consensus_rounds < 0) throw ConfigError("consensus_rounds must be >= 0");
  kernel_params().validate();
  if (basis_grid < 2) throw ConfigError("basis_grid must be >= 2");
  if (basis_rank < 1 || basis_rank > basis_grid * basis_grid)
    throw ConfigError("basis_rank must be in [1, basis_grid^2]");
}

double EnvConfig::amplitude_of(int target) const {
  return target < static_cast<int>(amplitudes.size()) ? amplitudes[target] : amplitude;
}

KernelParams EnvConfig::kernel_params() const {
  return KernelParams{signal_variance, {length_scale_x, length_scale_y}, sigma_n * sigma_n};
}

EnvConfig EnvConfig::from_key_values(const KeyValues& kv) {
  using detail::parse_double;
  using detail::parse_int;
  EnvConfig c;
  c.workspace.lo.x() = parse_double(kv, "workspace_min_x", c.workspace.lo.x());
  c.workspace.lo.y() = parse_double(kv, "workspace_min_y", c.workspace.lo.y());
  c.workspace.hi.x() = parse_double(kv, "workspace_max_x", c.workspace.hi.x());
  c.workspace.hi.y() = parse_double(kv, "workspace_max_y", c.workspace.hi.y());
  c.num_agents = static_cast<int>(parse_int(kv, "num_agents", c.num_agents));
  c.num_targets = static_cast<int>(parse_int(kv, "num_targets", c.num_targets));
  c.num_obstacles = static_cast<int>(parse_int(kv, "num_obstacles", c.num_obstacles));
  c.agent_radius = parse_double(kv, "agent_radius", c.agent_radius);
  c.target_radius = parse_double(kv, "target_radius", c.target_radius);
  c.obstacle_radius = parse_double(kv, "obstacle_radius", c.obstacle_radius);
  c.v_max = parse_double(kv, "v_max", c.v_max);
  c.a_max = parse_double(kv, "a_max", c.a_max);
  c.dt = parse_double(kv, "dt", c.dt);
  c.damping = parse_double(kv, "damping", c.damping);
  c.d_comm = parse_double(kv, "d_comm", c.d_comm);
  c.episode_len = static_cast<int>(parse_int(kv, "episode_len", c.episode_len));
  c.d_char = parse_double(kv, "d_char", c.d_char);
  c.amplitude = parse_double(kv, "amplitude", c.amplitude);
  if (auto it = kv.find("amplitudes"); it != kv.end()) {
    std::istringstream in(it->second);
    std::string item;
    KeyValues one;
    while (std::getline(in, item, ',')) {
      one["amplitudes"] = trim(item);
      c.amplitudes.push_back(parse_double(one, "amplitudes", 0.0));
    }
  }
  c.intensity_scale = parse_double(kv, "intensity_scale", c.intensity_scale);
  c.sigma_n = parse_double(kv, "sigma_n", c.sigma_n);
  c.raster = static_cast<int>(parse_int(kv, "raster", c.raster));
  c.consensus_rounds = static_cast<int>(parse_int(kv, "consensus_rounds", c.consensus_rounds));
  c.seed = static_cast<std::uint64_t>(parse_int(kv, "seed", static_cast<long long>(c.seed)));
  c.signal_variance = parse_double(kv, "signal_variance", c.signal_variance);
  c.length_scale_x = parse_double(kv, "length_scale_x", c.length_scale_x);
  c.length_scale_y = parse_double(kv, "length_scale_y", c.length_scale_y);
  c.basis_grid = static_cast<int>(parse_int(kv, "basis_grid", c.basis_grid));
  c.basis_rank = static_cast<int>(parse_int(kv, "basis_rank", c.basis_rank));
  c.validate();
  return c;
}

EnvConfig EnvConfig::load(const std::filesystem::path& path) {
  return from_key_values(read_key_values(path));
}

KeyValues EnvConfig::to_key_values() const {
  KeyValues kv;
  kv["workspace_min_x"] = fmt(workspace.lo.x());
  kv["workspace_min_y"] = fmt(workspace.lo.y());
  kv["workspace_max_x"] = fmt(workspace.hi.x());
  kv["workspace_max_y"] = fmt(workspace.hi.y());
  kv["num_agents"] = std::to_string(num_agents);
  kv["num_targets"] = std::to_string(num_targets);
  kv["num_obstacles"] = std::to_string(num_obstacles);
  kv["agent_radius"] = fmt(agent_radius);
  kv["target_radius"] = fmt(target_radius);
  kv["obstacle_radius"] = fmt(obstacle_radius);
  kv["v_max"] = fmt(v_max);
  kv["a_max"] = fmt(a_max);
  kv["dt"] = fmt(dt);
  kv["damping"] = fmt(damping);
  kv["d_comm"] = fmt(d_comm);
  kv["episode_len"] = std::to_string(episode_len);
  kv["d_char"] = fmt(d_char);
  kv["amplitude"] = fmt(amplitude);
  if (!amplitudes.empty()) {
    std::string s;
    for (std::size_t i = 0; i < amplitudes.size(); ++i) s += (i ? "," : "") + fmt(amplitudes[i]);
    kv["amplitudes"] = s;
  }
  kv["intensity_scale"] = fmt(intensity_scale);
  kv["sigma_n"] = fmt(sigma_n);
  kv["raster"] = std::to_string(raster);
  kv["consensus_rounds"] = std::to_string(consensus_rounds);
  kv["seed"] = std::to_string(seed);
  kv["signal_variance"] = fmt(signal_variance);
  kv["length_scale_x"] = fmt(length_scale_x);
  kv["length_scale_y"] = fmt(length_scale_y);
  kv["basis_grid"] = std::to_string(basis_grid);
  kv["basis_rank"] = std::to_string(basis_rank);
  return kv;
}

}  // namespace gpswarm
