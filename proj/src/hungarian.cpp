#include "deepcontext/hungarian.hpp"

#include <limits>
#include <stdexcept>

namespace deepcontext {

// Shortest augmenting path formulation with row/column potentials
// (Kuhn-Munkres, O(n^2 m)). Works on n <= m; wider inputs are transposed.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0) return {};
  if (cols == 0) return std::vector<int>(rows, -1);
  if (!cost.allFinite()) throw std::invalid_argument("assignment costs must be finite");

  const bool transposed = rows > cols;
  const Eigen::MatrixXd c = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based with a virtual column 0, following the classic formulation.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match_col(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> result(rows, -1);
  for (int j = 1; j <= m; ++j) {
    if (match_col[j] == 0) continue;
    const int r = match_col[j] - 1;
    const int col = j - 1;
    if (transposed)
      result[col] = r;
    else
      result[r] = col;
  }
  return result;
}

}  // namespace deepcontext
