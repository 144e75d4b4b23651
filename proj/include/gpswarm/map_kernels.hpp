#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "gpswarm/dgp_consensus.hpp"
#include "gpswarm/geometry.hpp"

namespace gpswarm {

/// World-frame raster over a rectangle. Cell (r, c) has its center at
/// lo + ((c + 0.5) * width / cols, (r + 0.5) * height / rows); flat index
/// is r * cols + c, so row 0 is the bottom edge.
struct MapGrid {
  Rect bounds;
  int rows = 32;
  int cols = 32;

  int size() const { return rows * cols; }
  double cell_width() const { return bounds.width() / cols; }
  double cell_height() const { return bounds.height() / rows; }
  Vec2 center(int r, int c) const {
    return {bounds.lo.x() + (c + 0.5) * cell_width(), bounds.lo.y() + (r + 0.5) * cell_height()};
  }
  Vec2 center(int flat) const { return center(flat / cols, flat % cols); }
  std::vector<Vec2> centers() const;
};

/// Basis features and prior variances of every cell center, computed once
/// per (basis, grid) pair.
struct GridFeatures {
  Eigen::MatrixXd phi;    // size() x E
  Eigen::VectorXd prior;  // kappa(x, x) per cell

  static GridFeatures compute(const BasisSet& basis, const MapGrid& grid);
};

/// Fill mean and standard deviation (clamped to [0, 1]) for each cell.
/// OpenMP over cells; per-cell arithmetic is shared with the serial path,
/// so both produce identical bits.
void evaluate_map(const GpMap& map, const GridFeatures& f, std::span<double> mean_out,
                  std::span<double> std_out);
void evaluate_map_serial(const GpMap& map, const GridFeatures& f, std::span<double> mean_out,
                         std::span<double> std_out);

}  // namespace gpswarm
