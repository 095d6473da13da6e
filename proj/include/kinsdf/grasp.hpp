#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/composite.hpp"

namespace kinsdf {

struct GraspProblem {
  Eigen::Matrix3Xd object_points;
  Eigen::Matrix3Xd object_normals;  // outward, unit
  Eigen::Matrix3Xd obstacle_points;
  std::vector<std::size_t> contact_links;  // global link indices
  double d_min_obs = 0.01;
  double d_p = 0.002;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double mu = 0.5;
  int facets = 8;
  /// Extra clearance the solver demands from the learned field in the
  /// obstacle and free-link constraints, to absorb field error.
  double field_margin = 0.0;
  /// Combine contact terms with a sum instead of the maximum.
  bool sum_contacts = false;

  /// Throws InvalidArgument on a violated invariant.
  void validate(const CompositeSystem& sys) const;
  std::vector<std::size_t> free_links(std::size_t link_count) const;
};

/// Problem document (docs/formats.md); point files are resolved relative to it.
GraspProblem load_problem(const std::filesystem::path& path, const CompositeSystem& sys);
/// CSV rows "x,y,z" or "x,y,z,nx,ny,nz" (a header line is skipped), or ASCII
/// PLY with x/y/z and optional nx/ny/nz vertex properties.
void load_points(const std::filesystem::path& path, Eigen::Matrix3Xd& points, Eigen::Matrix3Xd* normals);
/// Evenly spread points (Fibonacci lattice) on a sphere, with outward normals.
void sphere_points(const Eigen::Vector3d& center, double radius, int count, Eigen::Matrix3Xd& points,
                   Eigen::Matrix3Xd* normals);

/// -tau * log(sum exp(-v_i / tau)), evaluated stably. Lies in
/// [min v - tau * log(count), min v]. `weights` receives d/dv.
double soft_min(const Eigen::VectorXd& v, double tau, Eigen::VectorXd* weights = nullptr);

struct ConstraintValues {
  double c_obs = 0.0;   // min obstacle distance - d_min (+inf without obstacles)
  double c_free = 0.0;  // min object distance over free links (+inf without free links)
};

/// Hard-min constraint values on the system's fields.
ConstraintValues constraint_values(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q);

/// Per contact link: the minimum predicted distance over the object points
/// and the index of the object point attaining it (lowest index on ties).
struct ContactDistances {
  Eigen::VectorXd distance;
  std::vector<std::size_t> point;
};
ContactDistances contact_distances(const Eigen::MatrixXd& object_distances, const GraspProblem& prob);

/// Q = l1 * max_k ReLU(d_k) + l2 * max_k ReLU(-d_k - d_p) (sum when configured).
double contact_objective(const Eigen::VectorXd& contact_distance, const GraspProblem& prob);
double grasp_objective(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q);

/// Smoothed quantities the solver works with: soft-min over points and
/// links, a softplus in place of ReLU and a log-sum-exp in place of the
/// maximum, all at temperature tau. The constraint values include the field
/// margin.
struct SmoothTerms {
  double objective = 0.0;
  double c_obs = 0.0;
  double c_free = 0.0;
  Eigen::VectorXd grad_objective;
  Eigen::VectorXd grad_obs;
  Eigen::VectorXd grad_free;
};
SmoothTerms smooth_terms(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q, double tau,
                         bool with_gradients);

/// Augmented-Lagrangian merit for inequality constraints c >= 0.
struct Multipliers {
  double obs = 0.0;
  double free = 0.0;
  double rho = 100.0;
};
double augmented_lagrangian(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q, double tau,
                            const Multipliers& mult, Eigen::VectorXd* grad);

enum class ContactModel { hard_point, soft_finger };

struct ContactPoint {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // inward, unit
};

struct ForceClosureResult {
  bool closure = false;
  int rank = 0;  // of the edge-wrench matrix
  std::string diagnostic;
};

inline constexpr double kForceClosureEpsilon = 1e-8;

/// Linearized friction cones as edge wrenches (torque about `center`, divided
/// by `char_length`). Closure holds iff the wrenches have rank 6 and a
/// combination with every coefficient >= 1e-8, summing to one, cancels.
/// The soft-finger model adds a pure torsional wrench pair about each normal
/// with magnitude `torsion_ratio` (times char_length) per unit normal force.
ForceClosureResult force_closure(const std::vector<ContactPoint>& contacts, double mu, int facets,
                                 const Eigen::Vector3d& center, double char_length,
                                 ContactModel model = ContactModel::soft_finger, double torsion_ratio = 0.1);

enum class GraspStatus { converged, infeasible, max_iterations };
std::string status_name(GraspStatus s);

struct PlannerOptions {
  double tau = 1e-3;
  double tau_decay = 0.5;
  double tau_min = 1e-5;
  int max_outer = 12;
  int inner_iterations = 150;
  /// Joint motion cap per inner iteration (rad). Long steps can carry a link
  /// from outside the object to deep inside it, where the surface-sampled
  /// distance saturates and no gradient leads back out.
  double max_step = 0.02;
  double rho = 100.0;
  double rho_growth = 10.0;
  double rho_max = 1e8;
  double objective_tolerance = 1e-6;
  double constraint_tolerance = 1e-4;
  ContactModel contact_model = ContactModel::soft_finger;
  double torsion_ratio = 0.1;
  /// Also require the exact-oracle recomputation to meet the tolerances.
  bool certify_with_oracle = true;
  /// Learned-field close RMSE (m); exact/field disagreement beyond 3x this
  /// flags the solution. 0 disables the comparison.
  double field_close_rmse = 0.0;
};

struct GraspDiagnostics {
  double objective = 0.0;
  double min_obstacle_distance = 0.0;  // +inf without obstacles
  double max_free_penetration = 0.0;   // max(0, -min free-link distance)
  Eigen::VectorXd contact_distance;
  std::vector<std::size_t> contact_point;
  ForceClosureResult force_closure;
  bool exact_available = false;
  double exact_min_obstacle_distance = 0.0;
  double exact_max_free_penetration = 0.0;
  Eigen::VectorXd exact_contact_distance;
  double max_discrepancy = 0.0;  // |field - exact| over the reported distances
  bool flagged = false;
  std::string note;
};

struct GraspSolution {
  Eigen::VectorXd q;
  GraspStatus status = GraspStatus::max_iterations;
  GraspDiagnostics diagnostics;
  int outer_iterations = 0;
  std::uint64_t seed = 0;
};

/// Recomputes every diagnostic from q (hard minima; exact oracle as well).
GraspDiagnostics diagnose(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q,
                          const PlannerOptions& options);

/// Infeasibility certificate: every object point has an obstacle point closer
/// than d_min, so no link can touch the object while keeping clearance.
bool certainly_infeasible(const GraspProblem& prob);

GraspSolution plan_grasp(const CompositeSystem& sys, const GraspProblem& prob, const Eigen::VectorXd& q_init,
                         const PlannerOptions& options = {});

/// Restarts from uniform random configurations within the joint limits
/// (restart r uses stream (seed, r)). Draws are repeated, up to 200 times,
/// until no link touches the object and every link clears the obstacles by
/// d_min; the last draw is used otherwise. Returns every solution and the index of
/// the selected one: converged first, then lowest Q, then lowest restart.
struct RestartResult {
  std::vector<GraspSolution> solutions;
  std::size_t best = 0;
};
RestartResult plan_with_restarts(const CompositeSystem& sys, const GraspProblem& prob, int restarts, std::uint64_t seed,
                                 const PlannerOptions& options = {}, unsigned workers = 1);

/// Structured text rendering of a solution.
std::string format_solution(const CompositeSystem& sys, const GraspProblem& prob, const GraspSolution& sol);

}  // namespace kinsdf
