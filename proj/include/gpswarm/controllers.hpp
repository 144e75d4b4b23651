#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpswarm/env_config.hpp"
#include "gpswarm/map_kernels.hpp"
#include "gpswarm/swarm_env.hpp"

namespace gpswarm {

/// Anything that maps one agent's observation to an acceleration command.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Called at the start of every episode.
  virtual void reset(std::uint64_t /*seed*/) {}
  virtual Vec2 act(const Observation& obs, int agent_id) = 0;
};

/// Uniform sample from the disk of radius a_max.
Vec2 random_act(std::mt19937_64& rng, double a_max);

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(double a_max) : a_max_(a_max) {}
  std::string name() const override { return "random"; }
  void reset(std::uint64_t seed) override { rng_.seed(seed); }
  Vec2 act(const Observation&, int) override { return random_act(rng_, a_max_); }

 private:
  double a_max_;
  std::mt19937_64 rng_;
};

struct HeuristicConfig {
  double peak_threshold = 0.3;
  double ucb_weight = 1.0;
  double k_p = 2.0;
  double k_d = 1.0;
  double repulsion_gain = 1.0;
  double repulsion_radius = 0.3;

  void validate() const;
  /// Keys are prefixed with "heuristic_", e.g. heuristic_k_p.
  static HeuristicConfig from_key_values(const KeyValues& kv);
};

struct Peak {
  Vec2 position;
  double value = 0.0;
  int cell = 0;
};

/// Local maxima of the mean channel (8-neighbourhood) above `threshold`.
/// Plateaus report only their lowest-index cell.
std::vector<Peak> detect_peaks(const Observation& obs, const MapGrid& grid, double threshold);

/// Entity positions recovered from the entity channel as blob centroids.
struct EntityEstimate {
  bool ego_visible = false;
  Vec2 ego = Vec2::Zero();
  std::vector<Vec2> other_agents;
  std::vector<Vec2> obstacles;
};
EntityEstimate extract_entities(const Observation& obs, const MapGrid& grid);

/// Highest mean + c * std cell; ties go to the lowest flat index.
int exploration_cell(const Observation& obs, double ucb_weight);

/// Assign visible agents to peaks; go to the assigned peak, otherwise to the
/// exploration cell. PD waypoint tracking plus repulsion from obstacles and
/// other agents, clipped to the acceleration disk.
Vec2 heuristic_act(const Observation& obs, std::span<const Peak> peaks, const MapGrid& grid,
                   const HeuristicConfig& hc, double a_max, int agent_id);

class HeuristicPolicy final : public Policy {
 public:
  HeuristicPolicy(HeuristicConfig hc, MapGrid grid, double a_max)
      : hc_(hc), grid_(grid), a_max_(a_max) {}
  std::string name() const override { return "heuristic"; }
  Vec2 act(const Observation& obs, int agent_id) override;

 private:
  HeuristicConfig hc_;
  MapGrid grid_;
  double a_max_;
};

/// One full episode with `policy` acting for every agent.
EpisodeTrace run_episode(SwarmEnv& env, Policy& policy, std::uint64_t seed);

/// Episode e uses seed master_seed + e, so different policies see the same
/// layouts. Metrics are averaged over episodes.
Metrics evaluate_policy(SwarmEnv& env, Policy& policy, std::uint64_t master_seed, int episodes);

/// "random" or "heuristic"; anything else throws ConfigError.
std::unique_ptr<Policy> make_policy(const std::string& name, const EnvConfig& cfg,
                                    const HeuristicConfig& hc = {});

}  // namespace gpswarm
