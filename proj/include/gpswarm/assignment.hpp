#pragma once

#include <Eigen/Core>
#include <vector>

namespace gpswarm {

struct Assignment {
  /// row_to_col[r] is the column matched to row r, or -1.
  std::vector<int> row_to_col;
  std::vector<int> col_to_row;
  double total_cost = 0.0;
};

/// Minimum-cost rectangular assignment (Hungarian method with potentials,
/// O(n^2 m)). Exactly min(rows, cols) pairs are matched.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace gpswarm
