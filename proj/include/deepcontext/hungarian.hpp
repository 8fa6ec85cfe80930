#pragma once

#include <Eigen/Core>
#include <vector>

namespace deepcontext {

// Minimum-cost assignment for a rectangular cost matrix (rows x cols).
// Returns, for each row, the assigned column or -1 when rows > cols.
// Every row is assigned when rows <= cols.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace deepcontext
