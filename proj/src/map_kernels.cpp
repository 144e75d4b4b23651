#include "gpswarm/map_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpswarm {

namespace {

inline void eval_cell(const GpMap& map, const GridFeatures& f, Eigen::Index i,
                      std::span<double> mean_out, std::span<double> std_out) {
  const auto phi = f.phi.row(i).transpose();
  mean_out[i] = map.mean_from_features(phi);
  std_out[i] = std::clamp(std::sqrt(map.variance_from_features(phi, f.prior(i))), 0.0, 1.0);
}

void check_sizes(const GridFeatures& f, std::span<double> m, std::span<double> s) {
  const auto n = static_cast<std::size_t>(f.phi.rows());
  if (m.size() != n || s.size() != n) throw std::invalid_argument("map output size mismatch");
}

}  // namespace

std::vector<Vec2> MapGrid::centers() const {
  std::vector<Vec2> out;
  out.reserve(size());
  for (int i = 0; i < size(); ++i) out.push_back(center(i));
  return out;
}

GridFeatures GridFeatures::compute(const BasisSet& basis, const MapGrid& grid) {
  const auto pts = grid.centers();
  GridFeatures f;
  f.phi = basis.features(pts);
  f.prior.resize(grid.size());
  for (int i = 0; i < grid.size(); ++i) f.prior(i) = kernel_eval(basis.kernel(), pts[i], pts[i]);
  return f;
}

void evaluate_map(const GpMap& map, const GridFeatures& f, std::span<double> mean_out,
                  std::span<double> std_out) {
  check_sizes(f, mean_out, std_out);
  const auto n = f.phi.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) eval_cell(map, f, i, mean_out, std_out);
}

void evaluate_map_serial(const GpMap& map, const GridFeatures& f, std::span<double> mean_out,
                         std::span<double> std_out) {
  check_sizes(f, mean_out, std_out);
  for (Eigen::Index i = 0; i < f.phi.rows(); ++i) eval_cell(map, f, i, mean_out, std_out);
}

}  // namespace gpswarm
