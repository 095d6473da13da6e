#include <cmath>

#include "kinsdf/errors.hpp"
#include "kinsdf/optim.hpp"

namespace kinsdf {

LpFeasibility find_nonnegative_solution(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol) {
  if (a.rows() != b.size()) throw DimensionMismatch("lp: A and b row counts differ");
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  // Tableau columns: n structural, m artificial, then the right-hand side.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = b[i] < 0.0 ? -1.0 : 1.0;
    t.row(i).head(n) = s * a.row(i);
    t(i, n + i) = 1.0;
    t(i, n + m) = s * b[i];
  }
  // Objective row: minimize the sum of artificials, kept in reduced form.
  for (Eigen::Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
  for (Eigen::Index i = 0; i < m; ++i) t(m, n + i) = 0.0;

  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  LpFeasibility res;
  const int max_pivots = 50 * static_cast<int>(n + m) + 100;
  while (res.pivots < max_pivots) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j) {
      if (t(m, j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, enter) > tol) {
        const double ratio = t(i, n + m) / t(i, enter);
        if (leave < 0 || ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
    }
    if (leave < 0) break;  // unbounded direction cannot occur in phase one
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
    ++res.pivots;
  }

  const double scale = 1.0 + b.cwiseAbs().sum();
  res.feasible = -t(m, n + m) <= tol * scale;
  res.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    if (j < n) res.x[j] = std::max(0.0, t(i, n + m));
  }
  if (res.feasible) {
    // Confirm against the original system; the tableau may have drifted.
    const double resid = (a * res.x - b).cwiseAbs().maxCoeff();
    res.feasible = resid <= 1e-8 * scale;
  }
  return res;
}

}  // namespace kinsdf
