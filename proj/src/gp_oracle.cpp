#include "gpswarm/gp_oracle.hpp"

#include <algorithm>

namespace gpswarm {

void Dataset::validate() const {
  if (inputs.size() != outputs.size()) throw ConfigError("dataset inputs/outputs size mismatch");
  if (static_cast<std::size_t>(per_agent) * agents != inputs.size())
    throw ConfigError("dataset size must equal w * N");
}

FullGp::FullGp(const KernelParams& params, const Dataset& data)
    : params_(params), inputs_(data.inputs) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  if (n == 0) return;
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel_eval(params, inputs_[i], inputs_[j]);
  k.diagonal().array() += params.noise_variance;
  llt_.compute(k);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("GP covariance not positive definite (duplicate inputs without noise?)");
  weights_ = llt_.solve(Eigen::Map<const Eigen::VectorXd>(data.outputs.data(), n));
}

Posterior FullGp::operator()(const Vec2& x) const {
  const double prior = kernel_eval(params_, x, x);
  if (inputs_.empty()) return {0.0, prior};
  Eigen::VectorXd kx(inputs_.size());
  for (std::size_t j = 0; j < inputs_.size(); ++j) kx(j) = kernel_eval(params_, inputs_[j], x);
  const Eigen::VectorXd v = llt_.matrixL().solve(kx);
  return {kx.dot(weights_), prior - v.squaredNorm()};
}

Posterior full_gp_posterior(const KernelParams& params, const Dataset& data, const Vec2& x) {
  return FullGp(params, data)(x);
}

CentralEstimator::CentralEstimator(const BasisSet& basis, const Dataset& data) : basis_(&basis) {
  data.validate();
  const int e = basis.rank();
  second_moment_ = Eigen::MatrixXd::Zero(e, e);
  first_moment_ = Eigen::VectorXd::Zero(e);
  if (data.size() == 0) return;
  empty_ = false;

  const double wn = static_cast<double>(data.size());
  const Eigen::MatrixXd g = basis.features(data.inputs);
  const Eigen::Map<const Eigen::VectorXd> y(data.outputs.data(), data.size());
  second_moment_ = g.transpose() * g / wn;
  first_moment_ = g.transpose() * y / wn;

  Eigen::MatrixXd inner = second_moment_;
  inner.diagonal() += (basis.kernel().noise_variance / wn) * basis.eigenvalues().cwiseInverse();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(inner);
  if (ldlt.info() != Eigen::Success) throw NumericalError("E-dim inner matrix is singular");
  mean_weights_ = ldlt.solve(first_moment_);
  var_operator_ = ldlt.solve(second_moment_ * basis.eigenvalues().asDiagonal());
}

double CentralEstimator::mean(const Vec2& x) const {
  if (empty_) return 0.0;
  return basis_->features(x).dot(mean_weights_);
}

double CentralEstimator::variance(const Vec2& x) const {
  const double prior = kernel_eval(basis_->kernel(), x, x);
  if (empty_) return prior;
  const Eigen::VectorXd phi = basis_->features(x);
  return std::clamp(prior - phi.dot(var_operator_ * phi), 0.0, prior);
}

double central_e_dim_estimate(const BasisSet& basis, const Dataset& data, const Vec2& x) {
  return CentralEstimator(basis, data).mean(x);
}

}  // namespace gpswarm
