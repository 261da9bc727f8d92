#include "bopdmd/assignment.hpp"

#include <limits>

#include "bopdmd/error.hpp"

namespace bopdmd {

// Potentials formulation (Kuhn-Munkres with row-by-row augmentation).
// Arrays are 1-based; slot 0 is the virtual unmatched column.
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, "assignment cost matrix must be square");
  }
  if (!cost.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "assignment costs must be finite");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const auto size = static_cast<std::size_t>(n + 1);
  std::vector<double> u(size, 0.0), v(size, 0.0);
  std::vector<Eigen::Index> match(size, 0), way(size, 0);

  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(size, inf);
    std::vector<bool> used(size, false);
    do {
      used[j0] = true;
      const Eigen::Index i0 = match[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) {
          continue;
        }
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 1; j <= n; ++j) {
    assignment[static_cast<std::size_t>(match[j] - 1)] = j - 1;
  }
  return assignment;
}

}  // namespace bopdmd
