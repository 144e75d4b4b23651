#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <vector>

#include "gpswarm/kernel_basis.hpp"

namespace gpswarm {

/// Pooled measurements of N agents with w samples each.
struct Dataset {
  std::vector<Vec2> inputs;
  std::vector<double> outputs;
  int per_agent = 0;
  int agents = 0;

  std::size_t size() const { return inputs.size(); }
  void validate() const;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact GP posterior with the (K + sigma_n^2 I) system factored once.
class FullGp {
 public:
  FullGp(const KernelParams& params, const Dataset& data);
  Posterior operator()(const Vec2& x) const;

 private:
  KernelParams params_;
  std::vector<Vec2> inputs_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd weights_;
};

Posterior full_gp_posterior(const KernelParams& params, const Dataset& data, const Vec2& x);

/// Centralised E-dimensional estimator built from the pooled design matrix G
/// (rows Phi(x_t)^T). Mean is Phi^T F_E y; variance uses the same inner
/// matrix as the distributed form. An empty dataset yields the prior.
class CentralEstimator {
 public:
  CentralEstimator(const BasisSet& basis, const Dataset& data);

  double mean(const Vec2& x) const;
  double variance(const Vec2& x) const;

  /// G^T G / (wN) and G^T y / (wN); the network averages of the GP states.
  const Eigen::MatrixXd& second_moment() const { return second_moment_; }
  const Eigen::VectorXd& first_moment() const { return first_moment_; }

 private:
  const BasisSet* basis_;
  bool empty_ = true;
  Eigen::MatrixXd second_moment_;
  Eigen::VectorXd first_moment_;
  Eigen::VectorXd mean_weights_;   // F_E y
  Eigen::MatrixXd var_operator_;   // inner^-1 * second_moment * Lambda
};

double central_e_dim_estimate(const BasisSet& basis, const Dataset& data, const Vec2& x);

}  // namespace gpswarm
