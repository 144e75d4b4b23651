#include "gpswarm/kernel_basis.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "gpswarm/binary_io.hpp"

namespace gpswarm {

namespace {

constexpr char kBasisMagic[5] = "GPSB";
constexpr std::uint32_t kBasisVersion = 1;
// Gram eigenvalues at or below this fraction of the largest are numerical zeros.
constexpr double kClampRatio = 1e-10;

Eigen::MatrixXd gram(const KernelParams& p, std::span<const Vec2> a, std::span<const Vec2> b) {
  Eigen::MatrixXd k(a.size(), b.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a.size()); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) k(i, j) = kernel_eval(p, a[i], b[j]);
  return k;
}

}  // namespace

void KernelParams::validate() const {
  if (!(signal_variance > 0.0)) throw ConfigError("signal variance must be positive");
  if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
  if (!(length_scale.x() > 0.0 && length_scale.y() > 0.0))
    throw ConfigError("length-scale diagonal must be positive");
}

double kernel_eval(const KernelParams& p, const Vec2& x1, const Vec2& x2) {
  const double dx = x1.x() - x2.x();
  const double dy = x1.y() - x2.y();
  return p.signal_variance *
         std::exp(-0.5 * (dx * dx / p.length_scale.x() + dy * dy / p.length_scale.y()));
}

std::vector<Vec2> cell_centers(const Rect& r, int rows, int cols) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(rows) * cols);
  const double hx = r.width() / cols;
  const double hy = r.height() / rows;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      pts.emplace_back(r.lo.x() + (j + 0.5) * hx, r.lo.y() + (i + 0.5) * hy);
  return pts;
}

BasisSet BasisSet::build(const KernelParams& params, const Rect& workspace, int grid_side,
                         int rank) {
  params.validate();
  if (grid_side < 2) throw ConfigError("basis grid side must be >= 2");
  const int n_points = grid_side * grid_side;
  if (rank > n_points) throw ConfigError("basis rank exceeds number of grid points");

  BasisSet b;
  b.kernel_ = params;
  b.workspace_ = workspace;
  b.grid_side_ = grid_side;
  b.cell_area_ = workspace.area() / n_points;
  b.grid_ = cell_centers(workspace, grid_side, grid_side);

  const Eigen::MatrixXd k = gram(params, b.grid_, b.grid_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  if (eig.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");

  // Eigen returns ascending order.
  const Eigen::VectorXd mu = eig.eigenvalues().reverse();
  const double cutoff = kClampRatio * mu(0);
  int positive = 0;
  while (positive < n_points && mu(positive) > cutoff) ++positive;

  b.full_spectrum_ = mu.cwiseMax(0.0) * b.cell_area_;
  b.dropped_ = n_points - positive;
  if (rank <= 0) rank = positive;
  if (rank > positive)
    throw NumericalError("only " + std::to_string(positive) + " positive eigenpairs, " +
                         std::to_string(rank) + " requested");

  b.eigenvalues_ = mu.head(rank) * b.cell_area_;
  b.eigenvectors_ = eig.eigenvectors().rowwise().reverse().leftCols(rank);
  b.finalize();
  return b;
}

void BasisSet::finalize() {
  const Eigen::VectorXd mu = eigenvalues_ / cell_area_;
  extension_ = eigenvectors_ * (mu * std::sqrt(cell_area_)).cwiseInverse().asDiagonal();

  // Residual variance on a grid twice as fine as the basis grid, edges included.
  const int m = 2 * grid_side_ + 1;
  std::vector<Vec2> check;
  check.reserve(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      check.emplace_back(workspace_.lo.x() + j * workspace_.width() / (m - 1),
                         workspace_.lo.y() + i * workspace_.height() / (m - 1));
  const Eigen::MatrixXd f = features(check);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double approx = (f.row(i).array().square() * eigenvalues_.transpose().array()).sum();
    worst = std::max(worst, std::abs(kernel_.signal_variance - approx));
  }
  truncation_bound_ = worst;
}

void BasisSet::features_into(const Vec2& x, Eigen::Ref<Eigen::VectorXd> out) const {
  Eigen::VectorXd kx(grid_.size());
  for (std::size_t j = 0; j < grid_.size(); ++j) kx(j) = kernel_eval(kernel_, x, grid_[j]);
  out.noalias() = extension_.transpose() * kx;
}

Eigen::VectorXd BasisSet::features(const Vec2& x) const {
  Eigen::VectorXd out(rank());
  features_into(x, out);
  return out;
}

Eigen::MatrixXd BasisSet::features(std::span<const Vec2> points) const {
  return gram(kernel_, points, grid_) * extension_;
}

double BasisSet::reconstruct(const Vec2& x1, const Vec2& x2) const {
  const Eigen::VectorXd f1 = features(x1);
  const Eigen::VectorXd f2 = features(x2);
  double s = 0.0;
  for (int e = 0; e < rank(); ++e) s += eigenvalues_(e) * (f1(e) * f2(e));
  return s;
}

BasisSet BasisSet::truncated(int new_rank) const {
  if (new_rank < 1 || new_rank > rank()) throw ConfigError("invalid truncation rank");
  BasisSet b = *this;
  b.eigenvalues_ = eigenvalues_.head(new_rank);
  b.eigenvectors_ = eigenvectors_.leftCols(new_rank);
  b.finalize();
  return b;
}

void BasisSet::save(const std::filesystem::path& path) const {
  binio::Writer w(path, kBasisMagic, kBasisVersion);
  w.put(static_cast<double>(grid_side_));
  w.put(static_cast<double>(rank()));
  w.put(cell_area_);
  w.put(kernel_.signal_variance);
  w.put(kernel_.length_scale.x());
  w.put(kernel_.length_scale.y());
  w.put(kernel_.noise_variance);
  w.put(workspace_.lo.x());
  w.put(workspace_.lo.y());
  w.put(workspace_.hi.x());
  w.put(workspace_.hi.y());
  w.put_doubles(eigenvalues_.data(), eigenvalues_.size());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = eigenvectors_;
  w.put_doubles(rows.data(), rows.size());
  w.finish();
}

BasisSet BasisSet::load(const std::filesystem::path& path) {
  binio::Reader r(path, kBasisMagic, kBasisVersion);
  BasisSet b;
  b.grid_side_ = static_cast<int>(r.get<double>());
  const int rank = static_cast<int>(r.get<double>());
  b.cell_area_ = r.get<double>();
  b.kernel_.signal_variance = r.get<double>();
  const double lx = r.get<double>();
  const double ly = r.get<double>();
  b.kernel_.length_scale = {lx, ly};
  b.kernel_.noise_variance = r.get<double>();
  const double x0 = r.get<double>(), y0 = r.get<double>(), x1 = r.get<double>(),
               y1 = r.get<double>();
  b.workspace_ = Rect{{x0, y0}, {x1, y1}};
  if (b.grid_side_ < 2 || rank < 1 || rank > b.grid_side_ * b.grid_side_)
    throw std::runtime_error(path.string() + ": corrupt basis header");
  b.grid_ = cell_centers(b.workspace_, b.grid_side_, b.grid_side_);
  b.eigenvalues_.resize(rank);
  r.get_doubles(b.eigenvalues_.data(), rank);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(b.num_points(), rank);
  r.get_doubles(rows.data(), rows.size());
  b.eigenvectors_ = rows;
  b.finalize();
  return b;
}

}  // namespace gpswarm
