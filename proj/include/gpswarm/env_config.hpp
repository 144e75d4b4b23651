#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gpswarm/geometry.hpp"
#include "gpswarm/kernel_basis.hpp"

namespace gpswarm {

/// Flat `key = value` records; `#` starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

struct EnvConfig {
  Rect workspace;
  int num_agents = 3;
  int num_targets = 3;
  int num_obstacles = 2;
  double agent_radius = 0.05;
  double target_radius = 0.1;
  double obstacle_radius = 0.1;
  double v_max = 0.1;
  double a_max = 0.5;
  double dt = 0.1;
  double damping = 0.25;
  double d_comm = 2.0;
  int episode_len = 100;
  double d_char = 0.2;
  /// Per-target amplitude A^m; targets beyond the list use `amplitude`.
  std::vector<double> amplitudes;
  double amplitude = 1.0;
  double intensity_scale = 0.06;
  double sigma_n = 0.1;
  int raster = 32;
  int consensus_rounds = 5;
  std::uint64_t seed = 0;

  double signal_variance = 1.0;
  double length_scale_x = 0.05;
  double length_scale_y = 0.05;
  int basis_grid = 41;
  int basis_rank = 40;

  void validate() const;
  double amplitude_of(int target) const;
  KernelParams kernel_params() const;

  /// Unknown keys are ignored here so the same file can carry other
  /// sections (e.g. heuristic gains); malformed values throw ConfigError.
  static EnvConfig from_key_values(const KeyValues& kv);
  static EnvConfig load(const std::filesystem::path& path);
  KeyValues to_key_values() const;
};

namespace detail {
double parse_double(const KeyValues& kv, const std::string& key, double fallback);
long long parse_int(const KeyValues& kv, const std::string& key, long long fallback);
}  // namespace detail

}  // namespace gpswarm
