#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "gpswarm/kernel_basis.hpp"

namespace gpswarm {

/// Per-agent sufficient statistics: alpha = mean of Phi Phi^T, beta = mean of
/// Phi y over the agent's w measurements.
struct GpState {
  Eigen::MatrixXd alpha;
  Eigen::VectorXd beta;
  std::uint64_t w = 0;
  int agent_id = 0;

  static GpState zero(int rank, int agent_id = 0);
  int rank() const { return static_cast<int>(beta.size()); }

  void save(const std::filesystem::path& path) const;
  static GpState load(const std::filesystem::path& path);
};

/// Running-average update with one new sample.
void fuse_measurement(GpState& s, const Eigen::VectorXd& phi, double y);
GpState fuse_measurement(const GpState& s, const BasisSet& basis, const Vec2& x, double y);

/// Undirected proximity graph; edge (i,j) iff |x_i - x_j| < d_comm.
struct CommGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // i < j
  std::vector<std::vector<int>> neighbors;

  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
  double metropolis_weight(int i, int j) const {
    return 1.0 / (1.0 + std::max(degree(i), degree(j)));
  }
  bool connected() const;
};

CommGraph build_graph(std::span<const Vec2> positions, double d_comm);
CommGraph graph_from_edges(int n, std::span<const std::pair<int, int>> edges);

/// One synchronous Metropolis averaging round over every alpha and beta entry.
/// Agents are processed in parallel against the pre-round snapshot.
std::vector<GpState> consensus_round(const std::vector<GpState>& states, const CommGraph& g);
/// Single-threaded reference; bit-identical to consensus_round.
std::vector<GpState> consensus_round_serial(const std::vector<GpState>& states,
                                            const CommGraph& g);

/// Largest absolute difference of any alpha/beta entry between any two agents.
double max_state_disagreement(std::span<const GpState> states);

/// Factored form of one agent's distributed estimator. The inner matrix
/// alpha + sigma_n^2/(wN) Lambda^-1 is factored once; queries are O(E^2)
/// plus the feature evaluation.
class GpMap {
 public:
  GpMap(const GpState& s, const BasisSet& basis, int total_agents);

  double mean(const Vec2& x) const;
  double variance(const Vec2& x) const;
  double mean_from_features(const Eigen::Ref<const Eigen::VectorXd>& phi) const;
  double variance_from_features(const Eigen::Ref<const Eigen::VectorXd>& phi,
                                double prior) const;
  bool is_prior() const { return prior_; }
  /// (alpha + c Lambda^-1)^-1 beta and (alpha + c Lambda^-1)^-1 alpha Lambda.
  const Eigen::VectorXd& mean_weights() const { return mean_weights_; }
  const Eigen::MatrixXd& variance_operator() const { return var_operator_; }

 private:
  const BasisSet* basis_;
  bool prior_ = true;
  Eigen::VectorXd mean_weights_;
  Eigen::MatrixXd var_operator_;
};

double dist_mean(const GpState& s, const BasisSet& basis, int total_agents, const Vec2& x);
double dist_var(const GpState& s, const BasisSet& basis, int total_agents, const Vec2& x);

}  // namespace gpswarm
