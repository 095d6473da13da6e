#include <doctest.h>

#include <cmath>
#include <vector>

#include "kinsdf/errors.hpp"
#include "kinsdf/optim.hpp"
#include "kinsdf/rng.hpp"

using namespace kinsdf;

namespace {

// Feasibility of {x >= 0, A x = b} by enumerating every column subset of size
// rank(A) and checking the basic solution.
bool enumerate_feasible(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < n; ++j) {
      if (mask & (1u << j)) cols.push_back(j);
    }
    if (static_cast<int>(cols.size()) > m) continue;
    Eigen::MatrixXd sub(m, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    Eigen::VectorXd xs = cols.empty() ? Eigen::VectorXd() : Eigen::VectorXd(sub.colPivHouseholderQr().solve(b));
    const double residual = cols.empty() ? b.norm() : (sub * xs - b).norm();
    if (residual > 1e-9) continue;
    if (cols.empty() || xs.minCoeff() >= -1e-9) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("phase-one simplex: hand cases") {
  Eigen::MatrixXd a(1, 2);
  a << 1.0, 1.0;
  Eigen::VectorXd b(1);
  b << 1.0;
  LpFeasibility r = find_nonnegative_solution(a, b);
  CHECK(r.feasible);
  CHECK(r.x.minCoeff() >= 0.0);
  CHECK((a * r.x - b).norm() < 1e-12);

  b << -1.0;
  CHECK_FALSE(find_nonnegative_solution(a, b).feasible);

  // x1 - x2 = 1 and x2 - x1 = 1 contradict.
  Eigen::MatrixXd c(2, 2);
  c << 1.0, -1.0, -1.0, 1.0;
  Eigen::VectorXd d(2);
  d << 1.0, 1.0;
  CHECK_FALSE(find_nonnegative_solution(c, d).feasible);

  // Redundant rows.
  Eigen::MatrixXd e(2, 3);
  e << 1.0, 2.0, 3.0, 2.0, 4.0, 6.0;
  Eigen::VectorXd f(2);
  f << 6.0, 12.0;
  r = find_nonnegative_solution(e, f);
  CHECK(r.feasible);
  CHECK((e * r.x - f).norm() < 1e-10);

  // b = 0 is always feasible.
  CHECK(find_nonnegative_solution(c, Eigen::VectorXd::Zero(2)).feasible);
}

TEST_CASE("phase-one simplex agrees with basic-solution enumeration") {
  Rng rng(11);
  int feasible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int m = 2 + trial % 3;
    const int n = m + 1 + trial % 4;
    Eigen::MatrixXd a(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    }
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) b[i] = rng.uniform(-1.0, 1.0);
    const bool expect = enumerate_feasible(a, b);
    const LpFeasibility r = find_nonnegative_solution(a, b);
    CHECK(r.feasible == expect);
    if (r.feasible) {
      ++feasible;
      CHECK(r.x.minCoeff() >= -1e-12);
      CHECK((a * r.x - b).norm() < 1e-9);
    }
  }
  // Both outcomes are exercised.
  CHECK(feasible > 50);
  CHECK(feasible < 350);
}

TEST_CASE("box L-BFGS matches projected gradient on convex quadratics") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 6;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    }
    const Eigen::MatrixXd h = m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.uniform(-3.0, 3.0);
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -0.5);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 0.7);
    const SmoothObjective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      grad = h * x - g;
      return 0.5 * x.dot(h * x) - g.dot(x);
    };
    // Oracle: projected gradient with step 1/L, run far past convergence.
    const double step = 1.0 / h.operatorNorm();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < 200000; ++it) y = (y - step * (h * y - g)).cwiseMax(lo).cwiseMin(hi);

    const LbfgsResult r = minimize_box(f, Eigen::VectorXd::Zero(n), lo, hi);
    CHECK(r.converged);
    CHECK((r.x - y).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((r.x.array() >= lo.array()).all());
    CHECK((r.x.array() <= hi.array()).all());
  }
}

TEST_CASE("box L-BFGS on Rosenbrock") {
  const SmoothObjective rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    grad.resize(2);
    grad[0] = -2.0 * a - 400.0 * x[0] * b;
    grad[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  Eigen::Vector2d x0(-1.2, 1.0);
  LbfgsOptions opt;
  opt.max_iterations = 2000;
  LbfgsResult r = minimize_box(rosen, x0, Eigen::Vector2d(-5, -5), Eigen::Vector2d(5, 5), opt);
  CHECK(r.converged);
  CHECK((r.x - Eigen::Vector2d(1, 1)).norm() < 1e-5);

  // With x <= 0.5 the optimum sits on the bound at (0.5, 0.25), f = 0.25.
  r = minimize_box(rosen, x0, Eigen::Vector2d(-5, -5), Eigen::Vector2d(0.5, 5), opt);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.x[1] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(r.f == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("box L-BFGS projects an infeasible start and never increases f") {
  const SmoothObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = 2.0 * x;
    return x.squaredNorm();
  };
  const Eigen::Vector3d lo(1.0, -1.0, -1.0);
  const Eigen::Vector3d hi(2.0, 1.0, 1.0);
  const LbfgsResult r = minimize_box(f, Eigen::Vector3d(10, 10, -10), lo, hi);
  CHECK(r.x[0] == 1.0);
  CHECK(std::abs(r.x[1]) < 1e-9);
  CHECK(std::abs(r.x[2]) < 1e-9);
  CHECK(r.f <= 1.0 + 1e-15);
}

TEST_CASE("box L-BFGS step cap bounds every iteration") {
  const SmoothObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = 2.0 * (x - Eigen::Vector2d(3.0, -2.0));
    return (x - Eigen::Vector2d(3.0, -2.0)).squaredNorm();
  };
  LbfgsOptions opt;
  opt.max_step = 0.1;
  const Eigen::Vector2d lo(-10, -10), hi(10, 10);
  for (int k = 1; k <= 25; ++k) {
    opt.max_iterations = k;
    const LbfgsResult r = minimize_box(f, Eigen::Vector2d::Zero(), lo, hi, opt);
    CHECK(r.x.lpNorm<Eigen::Infinity>() <= 0.1 * k + 1e-12);
  }
  opt.max_iterations = 200;
  const LbfgsResult r = minimize_box(f, Eigen::Vector2d::Zero(), lo, hi, opt);
  CHECK(r.converged);
  CHECK((r.x - Eigen::Vector2d(3.0, -2.0)).norm() < 1e-6);
  opt.max_step = 0.0;
  CHECK_THROWS_AS(minimize_box(f, Eigen::Vector2d::Zero(), lo, hi, opt), InvalidArgument);
}
