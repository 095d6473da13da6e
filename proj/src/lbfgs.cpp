#include <cmath>
#include <deque>

#include "kinsdf/errors.hpp"
#include "kinsdf/optim.hpp"

namespace kinsdf {

LbfgsResult minimize_box(const SmoothObjective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, const LbfgsOptions& opt) {
  if (x0.size() != lo.size() || x0.size() != hi.size()) throw DimensionMismatch("lbfgs: bound sizes differ");
  if ((lo.array() > hi.array()).any()) throw InvalidArgument("lbfgs: lower bound above upper bound");
  if (!(opt.max_step > 0.0)) throw InvalidArgument("lbfgs: max_step must be positive");
  const auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.cwiseMax(lo).cwiseMin(hi); };

  LbfgsResult res;
  res.x = project(x0);
  Eigen::VectorXd g(x0.size());
  res.f = f(res.x, g);
  ++res.evaluations;
  if (!std::isfinite(res.f) || !g.allFinite()) throw NumericalError("lbfgs: non-finite objective at the start point");

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  Eigen::VectorXd g_new(x0.size());

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    const Eigen::VectorXd pg = res.x - project(res.x - g);
    if (pg.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Variables held at a bound by the gradient stay fixed for this step.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(x0.size());
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
      if ((res.x[i] <= lo[i] && g[i] > 0.0) || (res.x[i] >= hi[i] && g[i] < 0.0)) free[i] = 0.0;
    }
    Eigen::VectorXd d = -g.cwiseProduct(free);
    const std::size_t k = s_hist.size();
    if (k > 0) {
      std::vector<double> alpha(k);
      Eigen::VectorXd r = g.cwiseProduct(free);
      for (std::size_t i = k; i-- > 0;) {
        alpha[i] = s_hist[i].dot(r) / y_hist[i].dot(s_hist[i]);
        r -= alpha[i] * y_hist[i];
      }
      r *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (std::size_t i = 0; i < k; ++i) {
        const double beta = y_hist[i].dot(r) / y_hist[i].dot(s_hist[i]);
        r += (alpha[i] - beta) * s_hist[i];
      }
      d = -r.cwiseProduct(free);
      if (!d.allFinite() || d.dot(g) >= 0.0) {
        d = -g.cwiseProduct(free);
        s_hist.clear();
        y_hist.clear();
      }
    }
    if (d.squaredNorm() == 0.0) {
      res.converged = true;
      break;
    }

    double t = 1.0;
    if (s_hist.empty()) t = std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>());
    t = std::min(t, opt.max_step / d.lpNorm<Eigen::Infinity>());
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = project(res.x + t * d);
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * g.dot(x_new - res.x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || !g_new.allFinite()) break;

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double decrease = res.f - f_new;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    if (decrease <= opt.function_tolerance * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

}  // namespace kinsdf
