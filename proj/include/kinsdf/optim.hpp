#pragma once

#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace kinsdf {

struct LpFeasibility {
  bool feasible = false;
  Eigen::VectorXd x;  // a feasible point when feasible
  int pivots = 0;
};

/// Finds x >= 0 with A x = b by the phase-one simplex method (dense tableau,
/// Bland's rule, so it terminates).
LpFeasibility find_nonnegative_solution(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol = 1e-10);

struct LbfgsOptions {
  int max_iterations = 200;
  int memory = 8;
  double gradient_tolerance = 1e-9;  // on the projected gradient, infinity norm
  double function_tolerance = 1e-13;  // relative decrease between iterates
  /// Largest change of any coordinate in one iteration.
  double max_step = std::numeric_limits<double>::infinity();
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Returns f(x) and writes the gradient into `grad`.
using SmoothObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Projected limited-memory BFGS for box constraints lo <= x <= hi: the
/// quasi-Newton step is taken in the free variables and the trial point is
/// projected back onto the box inside an Armijo backtracking search.
LbfgsResult minimize_box(const SmoothObjective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, const LbfgsOptions& options = {});

}  // namespace kinsdf
