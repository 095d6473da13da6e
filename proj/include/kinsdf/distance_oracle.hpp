#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kinsdf/robot_model.hpp"

namespace kinsdf {

/// |d| below this maps to exactly 0 ("on the link").
inline constexpr double kSurfaceEpsilon = 1e-9;

/// Signed distance from world point `p` to link `k` placed at `link_pose`:
/// positive outside, zero on the surface, negative inside.
double link_signed_distance(const RobotModel& model, std::size_t k, const Pose& link_pose, const Eigen::Vector3d& p);

/// Distances to every link for configuration q (one FK evaluation).
Eigen::VectorXd signed_distance_vector(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::Vector3d& p);

/// Same, reusing precomputed link poses.
Eigen::VectorXd signed_distance_vector(const RobotModel& model, const std::vector<Pose>& link_poses,
                                       const Eigen::Vector3d& p);

enum class OracleKind { primitives = 0, mesh = 1, mixed = 2 };
OracleKind oracle_kind(const RobotModel& model);
const char* oracle_kind_name(OracleKind kind);

}  // namespace kinsdf
