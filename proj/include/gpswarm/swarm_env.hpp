#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gpswarm/dgp_consensus.hpp"
#include "gpswarm/env_config.hpp"
#include "gpswarm/map_kernels.hpp"

namespace gpswarm {

/// Entity-map intensities in observation channel 2.
namespace entity_code {
inline constexpr double kBackground = 0.0;
inline constexpr double kObstacle = 0.3;
inline constexpr double kOtherAgent = 0.6;
inline constexpr double kEgo = 1.0;
}  // namespace entity_code

struct WorldState {
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
  std::vector<Vec2> target_pos;
  std::vector<double> amplitudes;
  std::vector<Vec2> obstacle_pos;
  int step = 0;
  std::mt19937_64 rng;

  bool operator==(const WorldState&) const = default;
};

/// 3 x rows x cols image (channel-major) plus the agent's own velocity.
struct Observation {
  int rows = 0;
  int cols = 0;
  std::vector<double> image;
  Vec2 velocity = Vec2::Zero();

  Observation() = default;
  Observation(int r, int c) : rows(r), cols(c), image(3 * static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int ch, int r, int c) { return image[(static_cast<std::size_t>(ch) * rows + r) * cols + c]; }
  double at(int ch, int r, int c) const {
    return image[(static_cast<std::size_t>(ch) * rows + r) * cols + c];
  }
  std::span<double> channel(int ch) {
    return {image.data() + static_cast<std::size_t>(ch) * rows * cols,
            static_cast<std::size_t>(rows) * cols};
  }
  std::span<const double> channel(int ch) const {
    return {image.data() + static_cast<std::size_t>(ch) * rows * cols,
            static_cast<std::size_t>(rows) * cols};
  }
  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  bool collision_aa = false;
  bool collision_ao = false;
  std::vector<double> target_distances;  // d^m

  bool operator==(const StepInfo&) const = default;
};

struct RewardBreakdown {
  double reward = 0.0;
  double r_target = 0.0;
  double r_collision = 0.0;
  StepInfo info;
};

struct StepResult {
  std::vector<Observation> observations;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct StepRecord {
  int k = 0;
  double reward = 0.0;
  StepInfo info;
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
};

struct Metrics {
  double r_avg = 0.0;
  double d_final = 0.0;
  double cr_aa = 0.0;
  double cr_ao = 0.0;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EpisodeDone : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Sum over targets of A^m exp(-0.5 d^2 / scale).
double signal_field(std::span<const Vec2> targets, std::span<const double> amplitudes,
                    const Vec2& x, double scale);

/// Field value at the agent plus N(0, sigma_n^2) noise drawn from `rng`.
double measure(const WorldState& w, const EnvConfig& cfg, int agent, std::mt19937_64& rng);

/// d^m per target from the min-cost agent/target matching. When there are
/// more targets than agents, unmatched targets get the nearest-agent distance.
std::vector<double> assign_targets(std::span<const Vec2> agents, std::span<const Vec2> targets);

inline bool disks_overlap(const Vec2& a, double ra, const Vec2& b, double rb) {
  return (a - b).norm() < ra + rb;
}

RewardBreakdown compute_reward(const WorldState& w, const EnvConfig& cfg);

/// Uniform rejection-sampled placement of agents, targets and obstacles.
WorldState place_entities(const EnvConfig& cfg, std::uint64_t seed);

/// Clip accelerations, integrate damped double-integrator dynamics, clip
/// speeds and clamp positions. Returns the accelerations actually applied.
std::vector<Vec2> apply_dynamics(WorldState& w, const EnvConfig& cfg, std::span<const Vec2> actions);

MapGrid observation_grid(const EnvConfig& cfg);

/// Channel 2: obstacles, then other agents, then the ego as filled disks.
void render_entity_channel(const WorldState& w, const EnvConfig& cfg, const MapGrid& grid,
                           int ego, std::span<double> out);

using FieldFn = std::function<double(const Vec2&)>;
Observation rasterize_observation(const WorldState& w, const EnvConfig& cfg, const MapGrid& grid,
                                  int agent, const FieldFn& gp_mean, const FieldFn& gp_std);

Metrics episode_metrics(const EpisodeTrace& trace);

/// Target search-and-tracking world with per-agent distributed GP maps.
/// Single-owner state machine: reset, then step until done.
class SwarmEnv {
 public:
  SwarmEnv(EnvConfig cfg, std::shared_ptr<const BasisSet> basis);

  std::vector<Observation> reset(std::uint64_t seed);
  StepResult step(std::span<const Vec2> actions);

  bool started() const { return started_; }
  bool done() const { return started_ && world_.step >= cfg_.episode_len; }
  const EnvConfig& config() const { return cfg_; }
  const BasisSet& basis() const { return *basis_; }
  const MapGrid& grid() const { return grid_; }
  const WorldState& world() const { return world_; }
  const std::vector<GpState>& gp_states() const { return states_; }
  const std::vector<Observation>& observations() const { return obs_; }
  const EpisodeTrace& trace() const { return trace_; }

 private:
  void render_observations();

  EnvConfig cfg_;
  std::shared_ptr<const BasisSet> basis_;
  MapGrid grid_;
  GridFeatures grid_features_;
  WorldState world_;
  std::vector<GpState> states_;
  std::vector<Observation> obs_;
  EpisodeTrace trace_;
  bool started_ = false;
};

/// Basis matching the config's kernel, workspace, grid and rank.
std::shared_ptr<const BasisSet> make_basis(const EnvConfig& cfg);

}  // namespace gpswarm
