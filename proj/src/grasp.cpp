#include "kinsdf/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "kinsdf/errors.hpp"
#include "kinsdf/optim.hpp"
#include "kinsdf/rng.hpp"
#include "kinsdf/text_document.hpp"

namespace kinsdf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double x, double tau) {
  const double z = x / tau;
  return z > 0.0 ? x + tau * std::log1p(std::exp(-z)) : tau * std::log1p(std::exp(z));
}

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

void GraspProblem::validate(const CompositeSystem& sys) const {
  if (object_points.cols() == 0) throw InvalidArgument("grasp problem needs object points");
  if (object_normals.cols() != object_points.cols()) throw InvalidArgument("every object point needs a normal");
  for (Eigen::Index i = 0; i < object_normals.cols(); ++i) {
    if (std::abs(object_normals.col(i).norm() - 1.0) > 1e-6) throw InvalidArgument("object normals must be unit length");
  }
  if (!object_points.allFinite() || !obstacle_points.allFinite()) throw InvalidArgument("points must be finite");
  if (contact_links.empty()) throw InvalidArgument("at least one contact link is required");
  for (std::size_t l : contact_links) {
    if (l >= sys.link_count()) throw InvalidArgument("contact link index out of range");
  }
  if (!(d_p > 0.0)) throw InvalidArgument("penetration depth d_p must be positive");
  if (!(d_min_obs >= 0.0)) throw InvalidArgument("obstacle clearance must be non-negative");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw InvalidArgument("objective weights must be non-negative");
  if (mu < 0.0) throw InvalidArgument("friction coefficient must be non-negative");
  if (facets < 3) throw InvalidArgument("friction cones need at least 3 facets");
  if (field_margin < 0.0) throw InvalidArgument("field margin must be non-negative");
}

std::vector<std::size_t> GraspProblem::free_links(std::size_t link_count) const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < link_count; ++l) {
    if (std::find(contact_links.begin(), contact_links.end(), l) == contact_links.end()) out.push_back(l);
  }
  return out;
}

double soft_min(const Eigen::VectorXd& v, double tau, Eigen::VectorXd* weights) {
  if (v.size() == 0) throw InvalidArgument("soft_min of an empty set");
  if (!(tau > 0.0)) throw InvalidArgument("soft_min temperature must be positive");
  const double m = v.minCoeff();
  const Eigen::VectorXd e = (-(v.array() - m) / tau).exp();
  const double s = e.sum();
  if (weights) *weights = e / s;
  return m - tau * std::log(s);
}

ContactDistances contact_distances(const Eigen::MatrixXd& d_obj, const GraspProblem& prob) {
  ContactDistances out;
  out.distance.resize(static_cast<Eigen::Index>(prob.contact_links.size()));
  out.point.resize(prob.contact_links.size());
  for (std::size_t k = 0; k < prob.contact_links.size(); ++k) {
    Eigen::Index idx = 0;
    // minCoeff returns the first minimum, i.e. the lowest point index.
    out.distance[static_cast<Eigen::Index>(k)] = d_obj.col(static_cast<Eigen::Index>(prob.contact_links[k])).minCoeff(&idx);
    out.point[k] = static_cast<std::size_t>(idx);
  }
  return out;
}

double contact_objective(const Eigen::VectorXd& d, const GraspProblem& prob) {
  const Eigen::ArrayXd above = d.array().max(0.0);
  const Eigen::ArrayXd below = (-d.array() - prob.d_p).max(0.0);
  if (prob.sum_contacts) return prob.lambda1 * above.sum() + prob.lambda2 * below.sum();
  return prob.lambda1 * above.maxCoeff() + prob.lambda2 * below.maxCoeff();
}

double grasp_objective(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q) {
  return contact_objective(contact_distances(sys.query(q, prob.object_points), prob).distance, prob);
}

ConstraintValues constraint_values(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q) {
  ConstraintValues c{kInf, kInf};
  if (prob.obstacle_points.cols() > 0) c.c_obs = sys.query(q, prob.obstacle_points).minCoeff() - prob.d_min_obs;
  const std::vector<std::size_t> free = prob.free_links(sys.link_count());
  if (!free.empty()) {
    const Eigen::MatrixXd d = sys.query(q, prob.object_points);
    for (std::size_t l : free) c.c_free = std::min(c.c_free, d.col(static_cast<Eigen::Index>(l)).minCoeff());
  }
  return c;
}

namespace {

// Smoothed values plus d(value)/d(distance) weight matrices.
struct SmoothParts {
  double objective = 0.0;
  double c_obs = kInf;
  double c_free = kInf;
  Eigen::MatrixXd w_objective;  // |obj| x L
  Eigen::MatrixXd w_free;       // |obj| x L
  Eigen::MatrixXd w_obs;        // |obs| x L
};

SmoothParts smooth_parts(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q, double tau) {
  SmoothParts s;
  const Eigen::MatrixXd d_obj = sys.query(q, prob.object_points);
  const Eigen::Index n_obj = d_obj.rows();
  const auto n_links = static_cast<Eigen::Index>(sys.link_count());
  s.w_objective = Eigen::MatrixXd::Zero(n_obj, n_links);
  s.w_free = Eigen::MatrixXd::Zero(n_obj, n_links);

  const auto nc = static_cast<Eigen::Index>(prob.contact_links.size());
  Eigen::VectorXd dc(nc);
  std::vector<Eigen::VectorXd> point_w(static_cast<std::size_t>(nc));
  for (Eigen::Index k = 0; k < nc; ++k) {
    dc[k] = soft_min(d_obj.col(static_cast<Eigen::Index>(prob.contact_links[static_cast<std::size_t>(k)])), tau,
                     &point_w[static_cast<std::size_t>(k)]);
  }
  Eigen::VectorXd r1(nc);
  Eigen::VectorXd r2(nc);
  for (Eigen::Index k = 0; k < nc; ++k) {
    r1[k] = softplus(dc[k], tau);
    r2[k] = softplus(-dc[k] - prob.d_p, tau);
  }
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;
  if (prob.sum_contacts) {
    s.objective = prob.lambda1 * r1.sum() + prob.lambda2 * r2.sum();
    w1 = Eigen::VectorXd::Ones(nc);
    w2 = Eigen::VectorXd::Ones(nc);
  } else {
    s.objective = -prob.lambda1 * soft_min(-r1, tau, &w1) - prob.lambda2 * soft_min(-r2, tau, &w2);
  }
  for (Eigen::Index k = 0; k < nc; ++k) {
    const double dq = prob.lambda1 * w1[k] * sigmoid(dc[k] / tau) - prob.lambda2 * w2[k] * sigmoid((-dc[k] - prob.d_p) / tau);
    s.w_objective.col(static_cast<Eigen::Index>(prob.contact_links[static_cast<std::size_t>(k)])) +=
        dq * point_w[static_cast<std::size_t>(k)];
  }

  const std::vector<std::size_t> free = prob.free_links(sys.link_count());
  if (!free.empty()) {
    Eigen::VectorXd flat(n_obj * static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      flat.segment(static_cast<Eigen::Index>(i) * n_obj, n_obj) = d_obj.col(static_cast<Eigen::Index>(free[i]));
    }
    Eigen::VectorXd w;
    s.c_free = soft_min(flat, tau, &w) - prob.field_margin;
    for (std::size_t i = 0; i < free.size(); ++i) {
      s.w_free.col(static_cast<Eigen::Index>(free[i])) = w.segment(static_cast<Eigen::Index>(i) * n_obj, n_obj);
    }
  }

  if (prob.obstacle_points.cols() > 0) {
    const Eigen::MatrixXd d_obs = sys.query(q, prob.obstacle_points);
    const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(d_obs.data(), d_obs.size());
    Eigen::VectorXd w;
    s.c_obs = soft_min(flat, tau, &w) - prob.d_min_obs - prob.field_margin;
    s.w_obs = Eigen::Map<const Eigen::MatrixXd>(w.data(), d_obs.rows(), d_obs.cols());
  } else {
    s.w_obs = Eigen::MatrixXd::Zero(0, n_links);
  }
  return s;
}

// PHR term for c >= 0 and its derivative with respect to c.
double phr(double c, double lambda, double rho, double* slope) {
  if (std::isfinite(c) && c <= lambda / rho) {
    *slope = -lambda + rho * c;
    return -lambda * c + 0.5 * rho * c * c;
  }
  *slope = 0.0;
  return -lambda * lambda / (2.0 * rho);
}

}  // namespace

SmoothTerms smooth_terms(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q, double tau,
                         bool with_gradients) {
  const SmoothParts s = smooth_parts(sys, prob, q, tau);
  SmoothTerms t;
  t.objective = s.objective;
  t.c_obs = s.c_obs;
  t.c_free = s.c_free;
  if (with_gradients) {
    t.grad_objective = sys.query_gradient(q, prob.object_points, s.w_objective);
    t.grad_free = sys.query_gradient(q, prob.object_points, s.w_free);
    t.grad_obs = prob.obstacle_points.cols() > 0 ? sys.query_gradient(q, prob.obstacle_points, s.w_obs)
                                                 : Eigen::VectorXd::Zero(q.size());
  }
  return t;
}

double augmented_lagrangian(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q, double tau,
                            const Multipliers& mult, Eigen::VectorXd* grad) {
  const SmoothParts s = smooth_parts(sys, prob, q, tau);
  double slope_obs = 0.0;
  double slope_free = 0.0;
  const double value = s.objective + phr(s.c_obs, mult.obs, mult.rho, &slope_obs) + phr(s.c_free, mult.free, mult.rho, &slope_free);
  if (grad) {
    *grad = sys.query_gradient(q, prob.object_points, s.w_objective + slope_free * s.w_free);
    if (prob.obstacle_points.cols() > 0 && slope_obs != 0.0) {
      *grad += sys.query_gradient(q, prob.obstacle_points, slope_obs * s.w_obs);
    }
  }
  return value;
}

ForceClosureResult force_closure(const std::vector<ContactPoint>& contacts, double mu, int facets,
                                 const Eigen::Vector3d& center, double char_length, ContactModel model,
                                 double torsion_ratio) {
  ForceClosureResult res;
  if (mu < 0.0) throw InvalidArgument("friction coefficient must be non-negative");
  if (facets < 3) throw InvalidArgument("friction cones need at least 3 facets");
  if (!(char_length > 0.0)) throw InvalidArgument("characteristic length must be positive");
  if (contacts.size() < 2) {
    res.diagnostic = "fewer than two contacts";
    return res;
  }
  std::vector<Eigen::Matrix<double, 6, 1>> edges;
  for (const ContactPoint& c : contacts) {
    const Eigen::Vector3d n = c.normal.normalized();
    const Eigen::Vector3d t1 = n.unitOrthogonal();
    const Eigen::Vector3d t2 = n.cross(t1);
    const Eigen::Vector3d r = c.point - center;
    auto push = [&](const Eigen::Vector3d& f, const Eigen::Vector3d& extra_torque) {
      Eigen::Matrix<double, 6, 1> w;
      w << f, r.cross(f) / char_length + extra_torque;
      edges.push_back(w);
    };
    for (int k = 0; k < facets; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / facets;
      push(n + mu * (std::cos(phi) * t1 + std::sin(phi) * t2), Eigen::Vector3d::Zero());
    }
    if (model == ContactModel::soft_finger) {
      push(n, torsion_ratio * n);
      push(n, -torsion_ratio * n);
    }
  }
  const auto count = static_cast<Eigen::Index>(edges.size());
  Eigen::MatrixXd w(6, count);
  for (Eigen::Index i = 0; i < count; ++i) w.col(i) = edges[static_cast<std::size_t>(i)];

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
  const Eigen::VectorXd sv = svd.singularValues();
  res.rank = static_cast<int>((sv.array() > 1e-9 * std::max(1.0, sv[0])).count());
  if (res.rank < 6) {
    res.diagnostic = "wrench matrix rank " + std::to_string(res.rank) + " < 6";
    return res;
  }
  // alpha = eps + beta, beta >= 0: W beta = -eps W 1, 1^T beta = 1 - count * eps.
  const double eps = kForceClosureEpsilon;
  Eigen::MatrixXd a(7, count);
  a.topRows(6) = w;
  a.row(6).setOnes();
  Eigen::VectorXd b(7);
  b.head(6) = -eps * w.rowwise().sum();
  b[6] = 1.0 - static_cast<double>(count) * eps;
  const LpFeasibility lp = find_nonnegative_solution(a, b);
  res.closure = lp.feasible;
  res.diagnostic = lp.feasible ? "origin strictly inside the wrench hull" : "no strictly positive wrench combination";
  return res;
}

std::string status_name(GraspStatus s) {
  switch (s) {
    case GraspStatus::converged: return "converged";
    case GraspStatus::infeasible: return "infeasible";
    case GraspStatus::max_iterations: return "max-iterations";
  }
  return "unknown";
}

bool certainly_infeasible(const GraspProblem& prob) {
  if (prob.obstacle_points.cols() == 0) return false;
  for (Eigen::Index i = 0; i < prob.object_points.cols(); ++i) {
    const double nearest = (prob.obstacle_points.colwise() - prob.object_points.col(i)).colwise().norm().minCoeff();
    if (!(nearest < prob.d_min_obs)) return false;
  }
  return true;
}

namespace {

struct HardDistances {
  Eigen::VectorXd contact;
  std::vector<std::size_t> contact_point;
  double min_obstacle = kInf;
  double min_free = kInf;
};

HardDistances hard_distances(const GraspProblem& prob, const std::vector<std::size_t>& free, const Eigen::MatrixXd& d_obj,
                             const Eigen::MatrixXd* d_obs) {
  HardDistances h;
  const ContactDistances c = contact_distances(d_obj, prob);
  h.contact = c.distance;
  h.contact_point = c.point;
  if (d_obs && d_obs->size() > 0) h.min_obstacle = d_obs->minCoeff();
  for (std::size_t l : free) h.min_free = std::min(h.min_free, d_obj.col(static_cast<Eigen::Index>(l)).minCoeff());
  return h;
}

bool within_tolerances(const GraspProblem& prob, double min_obstacle, double min_free, const Eigen::VectorXd& contact,
                       double tol) {
  return min_obstacle >= prob.d_min_obs - tol && -min_free <= tol && (-contact.array()).maxCoeff() <= prob.d_p + tol;
}

}  // namespace

GraspDiagnostics diagnose(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q,
                          const PlannerOptions& opt) {
  GraspDiagnostics g;
  const std::vector<std::size_t> free = prob.free_links(sys.link_count());
  const bool has_obs = prob.obstacle_points.cols() > 0;

  const Eigen::MatrixXd d_obj = sys.query(q, prob.object_points);
  const Eigen::MatrixXd d_obs = has_obs ? sys.query(q, prob.obstacle_points) : Eigen::MatrixXd();
  const HardDistances h = hard_distances(prob, free, d_obj, has_obs ? &d_obs : nullptr);
  g.contact_distance = h.contact;
  g.contact_point = h.contact_point;
  g.objective = contact_objective(h.contact, prob);
  g.min_obstacle_distance = h.min_obstacle;
  g.max_free_penetration = std::max(0.0, -h.min_free);

  std::vector<ContactPoint> contacts;
  for (std::size_t k = 0; k < h.contact_point.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(h.contact_point[k]);
    contacts.push_back({prob.object_points.col(i), -prob.object_normals.col(i)});
  }
  const Eigen::Vector3d center = prob.object_points.rowwise().mean();
  const double radius = (prob.object_points.colwise() - center).colwise().norm().maxCoeff();
  g.force_closure = force_closure(contacts, prob.mu, prob.facets, center, std::max(radius, 1e-9), opt.contact_model,
                                  opt.torsion_ratio);

  g.exact_available = true;
  const Eigen::MatrixXd e_obj = sys.query_exact(q, prob.object_points);
  const Eigen::MatrixXd e_obs = has_obs ? sys.query_exact(q, prob.obstacle_points) : Eigen::MatrixXd();
  const HardDistances e = hard_distances(prob, free, e_obj, has_obs ? &e_obs : nullptr);
  g.exact_contact_distance = e.contact;
  g.exact_min_obstacle_distance = e.min_obstacle;
  g.exact_max_free_penetration = std::max(0.0, -e.min_free);

  double disc = (h.contact - e.contact).cwiseAbs().maxCoeff();
  if (has_obs) disc = std::max(disc, std::abs(h.min_obstacle - e.min_obstacle));
  if (!free.empty()) disc = std::max(disc, std::abs(h.min_free - e.min_free));
  g.max_discrepancy = disc;

  std::ostringstream note;
  if (opt.field_close_rmse > 0.0 && disc > 3.0 * opt.field_close_rmse) {
    g.flagged = true;
    note << "field and exact distances differ by " << disc * 1e3 << " mm; ";
  }
  if (!within_tolerances(prob, e.min_obstacle, e.min_free, e.contact, opt.constraint_tolerance)) {
    g.flagged = true;
    note << "exact recomputation violates the tolerances; ";
  }
  g.note = note.str();
  return g;
}

GraspSolution plan_grasp(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q_init,
                         const PlannerOptions& opt) {
  prob.validate(sys);
  if (static_cast<std::size_t>(q_init.size()) != sys.dof()) throw DimensionMismatch("q_init has wrong length");
  const Eigen::VectorXd lo = sys.lower_limits();
  const Eigen::VectorXd hi = sys.upper_limits();
  const Eigen::VectorXd span = hi - lo;
  if ((q_init.array() < (lo - 0.05 * span).array()).any() || (q_init.array() > (hi + 0.05 * span).array()).any()) {
    throw InvalidArgument("q_init lies outside the expanded joint limits");
  }

  GraspSolution sol;
  sol.q = q_init.cwiseMax(lo).cwiseMin(hi);
  if (certainly_infeasible(prob)) {
    sol.status = GraspStatus::infeasible;
    sol.diagnostics = diagnose(sys, prob, sol.q, opt);
    sol.diagnostics.note += "every object point lies within d_min of an obstacle point";
    return sol;
  }

  const std::vector<std::size_t> free = prob.free_links(sys.link_count());
  auto field_ok = [&](const Eigen::VectorXd& q) {
    const Eigen::MatrixXd d_obj = sys.query(q, prob.object_points);
    const Eigen::MatrixXd d_obs = prob.obstacle_points.cols() > 0 ? sys.query(q, prob.obstacle_points) : Eigen::MatrixXd();
    const HardDistances h = hard_distances(prob, free, d_obj, prob.obstacle_points.cols() > 0 ? &d_obs : nullptr);
    return contact_objective(h.contact, prob) <= opt.objective_tolerance &&
           within_tolerances(prob, h.min_obstacle, h.min_free, h.contact, opt.constraint_tolerance);
  };

  Multipliers mult{0.0, 0.0, opt.rho};
  double tau = opt.tau;
  double prev_violation = kInf;
  LbfgsOptions inner;
  inner.max_iterations = opt.inner_iterations;
  inner.max_step = opt.max_step;
  bool ok = field_ok(sol.q);
  while (!ok && sol.outer_iterations < opt.max_outer) {
    ++sol.outer_iterations;
    const SmoothObjective merit = [&](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
      return augmented_lagrangian(sys, prob, q, tau, mult, &grad);
    };
    const LbfgsResult r = minimize_box(merit, sol.q, lo, hi, inner);
    sol.q = r.x;
    ok = field_ok(sol.q);
    if (ok) break;

    const SmoothTerms t = smooth_terms(sys, prob, sol.q, tau, false);
    double violation = 0.0;
    if (std::isfinite(t.c_obs)) {
      mult.obs = std::max(0.0, mult.obs - mult.rho * t.c_obs);
      violation = std::max(violation, -t.c_obs);
    }
    if (std::isfinite(t.c_free)) {
      mult.free = std::max(0.0, mult.free - mult.rho * t.c_free);
      violation = std::max(violation, -t.c_free);
    }
    if (violation > 0.25 * prev_violation) mult.rho = std::min(opt.rho_max, mult.rho * opt.rho_growth);
    prev_violation = std::max(violation, 0.0);
    tau = std::max(opt.tau_min, tau * opt.tau_decay);
  }

  sol.diagnostics = diagnose(sys, prob, sol.q, opt);
  if (!ok) {
    sol.status = GraspStatus::max_iterations;
  } else if (!sol.diagnostics.force_closure.closure) {
    sol.status = GraspStatus::infeasible;
    sol.diagnostics.note += "contacts are not force closure: " + sol.diagnostics.force_closure.diagnostic;
  } else if (opt.certify_with_oracle && sol.diagnostics.flagged) {
    sol.status = GraspStatus::max_iterations;
  } else {
    sol.status = GraspStatus::converged;
  }
  return sol;
}

namespace {

constexpr int kStartAttempts = 200;

// Starts with a link already through the object trap the solver: link
// distances sampled at object surface points saturate at the link radius, so
// an impaling link sees no gradient back out.
bool clear_start(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q) {
  if (sys.query(q, prob.object_points).minCoeff() < 0.0) return false;
  return prob.obstacle_points.cols() == 0 || sys.query(q, prob.obstacle_points).minCoeff() >= prob.d_min_obs;
}

}  // namespace

RestartResult plan_with_restarts(const CompositeSystem& sys, const GraspProblem& prob, int restarts, std::uint64_t seed,
                                 const PlannerOptions& opt, unsigned workers) {
  if (restarts < 1) throw InvalidArgument("restarts must be at least 1");
  const Eigen::VectorXd lo = sys.lower_limits();
  const Eigen::VectorXd hi = sys.upper_limits();
  RestartResult out;
  out.solutions.resize(static_cast<std::size_t>(restarts));
  auto solve = [&](int r) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(r));
    Eigen::VectorXd q0(lo.size());
    for (int attempt = 0; attempt < kStartAttempts; ++attempt) {
      for (Eigen::Index i = 0; i < q0.size(); ++i) q0[i] = rng.uniform(lo[i], hi[i]);
      if (clear_start(sys, prob, q0)) break;
    }
    GraspSolution s = plan_grasp(sys, prob, q0, opt);
    s.seed = static_cast<std::uint64_t>(r);
    out.solutions[static_cast<std::size_t>(r)] = std::move(s);
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(restarts)));
  if (n_workers == 1) {
    for (int r = 0; r < restarts; ++r) solve(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (int r = static_cast<int>(w); r < restarts; r += static_cast<int>(n_workers)) solve(r);
      });
    }
    for (auto& t : pool) t.join();
  }
  auto rank = [](GraspStatus s) { return s == GraspStatus::converged ? 0 : 1; };
  for (std::size_t i = 1; i < out.solutions.size(); ++i) {
    const GraspSolution& a = out.solutions[i];
    const GraspSolution& b = out.solutions[out.best];
    if (rank(a.status) < rank(b.status) ||
        (rank(a.status) == rank(b.status) && a.diagnostics.objective < b.diagnostics.objective)) {
      out.best = i;
    }
  }
  return out;
}

void sphere_points(const Eigen::Vector3d& center, double radius, int count, Eigen::Matrix3Xd& points,
                   Eigen::Matrix3Xd* normals) {
  if (count < 1 || !(radius > 0.0)) throw InvalidArgument("sphere sampling needs count >= 1 and radius > 0");
  points.resize(3, count);
  if (normals) normals->resize(3, count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d n(r * std::cos(golden * i), r * std::sin(golden * i), z);
    points.col(i) = center + radius * n;
    if (normals) normals->col(i) = n;
  }
}

void load_points(const std::filesystem::path& path, Eigen::Matrix3Xd& points, Eigen::Matrix3Xd* normals) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  const bool ply = path.extension() == ".ply";
  int columns_wanted = normals ? 6 : 3;
  if (ply) {
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw ParseError(path.string() + ": missing ply header");
    std::size_t vertices = 0;
    std::vector<std::string> props;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string word;
      ls >> word;
      if (word == "format") {
        std::string fmt;
        ls >> fmt;
        if (fmt != "ascii") throw ParseError(path.string() + ": only ASCII PLY is supported");
      } else if (word == "element") {
        std::string kind;
        ls >> kind;
        if (kind == "vertex") ls >> vertices;
      } else if (word == "property") {
        std::string type;
        std::string name;
        ls >> type >> name;
        props.push_back(name);
      } else if (word == "end_header") {
        break;
      }
    }
    auto col = [&](const std::string& n) {
      const auto it = std::find(props.begin(), props.end(), n);
      if (it == props.end()) return -1;
      return static_cast<int>(it - props.begin());
    };
    const int ix = col("x");
    const int in_x = col("nx");
    if (ix < 0) throw ParseError(path.string() + ": PLY vertices need x, y, z");
    if (normals && in_x < 0) throw ParseError(path.string() + ": object points need nx, ny, nz");
    for (std::size_t v = 0; v < vertices && std::getline(in, line); ++v) {
      std::istringstream ls(line);
      std::vector<double> vals(props.size());
      for (double& x : vals) {
        if (!(ls >> x)) throw ParseError(path.string() + ": malformed vertex line");
      }
      std::vector<double> row{vals[static_cast<std::size_t>(ix)], vals[static_cast<std::size_t>(ix + 1)],
                              vals[static_cast<std::size_t>(ix + 2)]};
      if (normals) {
        row.insert(row.end(), {vals[static_cast<std::size_t>(in_x)], vals[static_cast<std::size_t>(in_x + 1)],
                               vals[static_cast<std::size_t>(in_x + 2)]});
      }
      rows.push_back(row);
    }
    if (rows.size() != vertices) throw ParseError(path.string() + ": fewer vertices than declared");
  } else {
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      std::vector<double> row;
      double x = 0.0;
      while (ls >> x) row.push_back(x);
      if (!ls.eof()) {
        if (rows.empty() && line_no == 1) continue;  // header
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
      }
      if (static_cast<int>(row.size()) < columns_wanted) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns_wanted) + " columns");
      }
      rows.push_back(row);
    }
  }
  points.resize(3, static_cast<Eigen::Index>(rows.size()));
  if (normals) normals->resize(3, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    points.col(c) << rows[i][0], rows[i][1], rows[i][2];
    if (normals) {
      Eigen::Vector3d n(rows[i][3], rows[i][4], rows[i][5]);
      if (n.norm() == 0.0) throw ParseError(path.string() + ": zero normal");
      normals->col(c) = n.normalized();
    }
  }
}

GraspProblem load_problem(const std::filesystem::path& path, const CompositeSystem& sys) {
  const TextDocument doc = TextDocument::load(path);
  const TextTable& root = doc.root();
  const std::filesystem::path dir = path.parent_path();
  GraspProblem p;
  p.d_min_obs = root.number_or("d_min_obs", p.d_min_obs);
  p.d_p = root.number_or("d_p", p.d_p);
  p.lambda1 = root.number_or("lambda1", p.lambda1);
  p.lambda2 = root.number_or("lambda2", p.lambda2);
  p.mu = root.number_or("mu", p.mu);
  p.facets = static_cast<int>(root.number_or("facets", p.facets));
  p.field_margin = root.number_or("field_margin", p.field_margin);
  const std::string combine = root.string_or("combine", "max");
  if (combine != "max" && combine != "sum") throw ParseError(path.string() + ": combine must be \"max\" or \"sum\"");
  p.sum_contacts = combine == "sum";
  for (const std::string& name : root.strings("contact_links")) p.contact_links.push_back(sys.link_index(name));

  auto read_set = [&](const TextTable& t, Eigen::Matrix3Xd& pts, Eigen::Matrix3Xd* nrm) {
    if (t.has("points")) {
      load_points(dir / t.string("points"), pts, nrm);
    } else {
      sphere_points(t.vec3("sphere_center"), t.number("sphere_radius"), static_cast<int>(t.number("sphere_count")), pts, nrm);
    }
  };
  const TextTable* object = doc.table("object");
  if (!object) throw ParseError(path.string() + ": missing [object] table");
  read_set(*object, p.object_points, &p.object_normals);
  std::vector<Eigen::Matrix3Xd> sets;
  for (const TextTable& t : doc.array("obstacle")) {
    Eigen::Matrix3Xd pts;
    read_set(t, pts, nullptr);
    sets.push_back(pts);
  }
  Eigen::Index total = 0;
  for (const auto& s : sets) total += s.cols();
  p.obstacle_points.resize(3, total);
  Eigen::Index at = 0;
  for (const auto& s : sets) {
    p.obstacle_points.middleCols(at, s.cols()) = s;
    at += s.cols();
  }
  p.validate(sys);
  return p;
}

std::string format_solution(const CompositeSystem& sys, const GraspProblem& prob, const GraspSolution& sol) {
  std::ostringstream os;
  os.precision(9);
  const GraspDiagnostics& d = sol.diagnostics;
  os << "status = \"" << status_name(sol.status) << "\"\n";
  os << "seed = " << sol.seed << "\n";
  os << "outer_iterations = " << sol.outer_iterations << "\n";
  os << "q = [";
  for (Eigen::Index i = 0; i < sol.q.size(); ++i) os << (i ? ", " : "") << sol.q[i];
  os << "]\n";
  os << "objective = " << d.objective << "\n";
  if (std::isfinite(d.min_obstacle_distance)) os << "min_obstacle_distance = " << d.min_obstacle_distance << "\n";
  os << "max_free_penetration = " << d.max_free_penetration << "\n";
  os << "force_closure = " << (d.force_closure.closure ? "true" : "false") << "\n";
  os << "wrench_rank = " << d.force_closure.rank << "\n";
  os << "flagged = " << (d.flagged ? "true" : "false") << "\n";
  if (!d.note.empty()) os << "note = \"" << d.note << "\"\n";
  for (std::size_t k = 0; k < prob.contact_links.size(); ++k) {
    os << "\n[[contact]]\n";
    os << "link = \"" << sys.registry()[prob.contact_links[k]].name << "\"\n";
    os << "distance = " << d.contact_distance[static_cast<Eigen::Index>(k)] << "\n";
    os << "object_point = " << d.contact_point[k] << "\n";
    if (d.exact_available) os << "exact_distance = " << d.exact_contact_distance[static_cast<Eigen::Index>(k)] << "\n";
  }
  if (d.exact_available) {
    os << "\n[exact]\n";
    if (std::isfinite(d.exact_min_obstacle_distance)) os << "min_obstacle_distance = " << d.exact_min_obstacle_distance << "\n";
    os << "max_free_penetration = " << d.exact_max_free_penetration << "\n";
    os << "max_discrepancy = " << d.max_discrepancy << "\n";
  }
  return os.str();
}

}  // namespace kinsdf
