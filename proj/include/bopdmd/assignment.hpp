#pragma once

#include <vector>

#include <Eigen/Core>

namespace bopdmd {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3)). Returns `assignment` with row i matched to column assignment[i].
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace bopdmd
