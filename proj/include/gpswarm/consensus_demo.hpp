#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gpswarm/env_config.hpp"

namespace gpswarm {

/// Static sensor-array map building: an 8x8 sensor grid measures a random
/// 3-target field once, then runs consensus rounds on the proximity graph.
struct ConsensusDemoOptions {
  EnvConfig env;             // kernel, workspace, noise, raster, basis
  std::uint64_t seed = 0;
  int sensors_per_side = 8;
  int num_targets = 3;
  int rounds = 300;
  double comm_range = 0.6;
  int watch_sensor = 0;      // sensor whose maps are exported (0 = lower-left)
  int pgm_every = 1;         // export maps every n rounds (and the last round)
  std::optional<std::filesystem::path> out_dir;
};

struct ConsensusRoundStats {
  int round = 0;
  double state_disagreement = 0.0;  // max entry spread of alpha/beta
  double mean_disagreement = 0.0;   // max over cells of the spread of sensor mean maps
  double var_disagreement = 0.0;
};

struct ConsensusDemoResult {
  std::vector<ConsensusRoundStats> rounds;  // round 0 = before any communication
  double final_vs_central_mean = 0.0;       // max-abs over the raster, all sensors
  double final_vs_central_var = 0.0;
  bool graph_connected = false;
  std::vector<std::filesystem::path> artifacts;
};

ConsensusDemoResult run_consensus_demo(const ConsensusDemoOptions& opt);

}  // namespace gpswarm
