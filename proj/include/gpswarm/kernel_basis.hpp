#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gpswarm/geometry.hpp"

namespace gpswarm {

/// Squared-exponential kernel hyperparameters. `length_scale` holds the
/// diagonal of the length-scale matrix (units of length squared).
struct KernelParams {
  double signal_variance = 1.0;
  Vec2 length_scale{0.05, 0.05};
  double noise_variance = 0.01;

  void validate() const;
};

double kernel_eval(const KernelParams& p, const Vec2& x1, const Vec2& x2);

/// Truncated Karhunen-Loeve expansion of the SE kernel on a rectangle,
/// computed with the Nystrom method on a uniform grid of cell centers.
///
/// Eigenfunctions are normalised so that sum_j phi_e(g_j) phi_f(g_j) dA is
/// the identity; lambda_e = mu_e * dA where mu_e are Gram eigenvalues.
/// Immutable once built.
class BasisSet {
 public:
  /// Pass `rank <= 0` to keep every numerically positive eigenpair.
  /// Throws NumericalError if fewer than `rank` positive eigenpairs exist.
  static BasisSet build(const KernelParams& params, const Rect& workspace, int grid_side,
                        int rank);

  int rank() const { return static_cast<int>(eigenvalues_.size()); }
  int grid_side() const { return grid_side_; }
  int num_points() const { return grid_side_ * grid_side_; }
  double cell_area() const { return cell_area_; }
  const Rect& workspace() const { return workspace_; }
  const KernelParams& kernel() const { return kernel_; }
  const std::vector<Vec2>& grid_points() const { return grid_; }

  /// lambda_1 >= ... >= lambda_E > 0.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  /// P x E, unit-norm columns.
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

  /// Every Gram eigenvalue times dA, descending, including the ones that
  /// were not retained (clamped at zero). Empty for loaded bases.
  const Eigen::VectorXd& full_spectrum() const { return full_spectrum_; }
  /// Eigenpairs that came out non-positive and were dropped.
  int dropped_count() const { return dropped_; }

  /// Max of kappa(x,x) - sum_e lambda_e phi_e(x)^2 over a refined check
  /// grid. Bounds |kappa - reconstruct| for any pair by Cauchy-Schwarz.
  double truncation_bound() const { return truncation_bound_; }

  Eigen::VectorXd features(const Vec2& x) const;
  void features_into(const Vec2& x, Eigen::Ref<Eigen::VectorXd> out) const;
  /// Row i is the feature vector of points[i]. OpenMP over points.
  Eigen::MatrixXd features(std::span<const Vec2> points) const;

  double reconstruct(const Vec2& x1, const Vec2& x2) const;

  /// Keep only the leading `rank` eigenpairs.
  BasisSet truncated(int rank) const;

  void save(const std::filesystem::path& path) const;
  static BasisSet load(const std::filesystem::path& path);

 private:
  BasisSet() = default;
  void finalize();

  KernelParams kernel_;
  Rect workspace_;
  int grid_side_ = 0;
  double cell_area_ = 0.0;
  std::vector<Vec2> grid_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd full_spectrum_;
  int dropped_ = 0;
  double truncation_bound_ = 0.0;
  // eigenvectors_ with column e scaled by 1/(mu_e sqrt(dA)).
  Eigen::MatrixXd extension_;
};

/// Uniform n x n cell-center grid, row-major with row 0 at lo.y.
std::vector<Vec2> cell_centers(const Rect& r, int rows, int cols);

}  // namespace gpswarm
