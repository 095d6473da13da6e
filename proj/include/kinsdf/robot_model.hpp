#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/geometry.hpp"
#include "kinsdf/pose.hpp"

namespace kinsdf {

struct LinkSpec {
  std::string name;
  Geometry geometry;
  /// Placement of the geometry in the link frame.
  Pose origin;
};

/// Revolute joint i connects link i (parent) to link i+1 (child).
struct JointSpec {
  std::string name;
  std::size_t parent_link = 0;
  Pose origin;  // parent link frame -> joint frame at q = 0
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
};

/// Serial revolute chain with per-link geometry. Immutable once built.
class RobotModel {
 public:
  /// Validates every invariant; throws NonUnitAxisError, InvalidLimitsError,
  /// InvalidGeometryError or ParseError (structure).
  RobotModel(std::string name, std::vector<LinkSpec> links, std::vector<JointSpec> joints,
             Pose base = Pose::identity());

  const std::string& name() const { return name_; }
  std::size_t dof() const { return joints_.size(); }
  std::size_t link_count() const { return links_.size(); }
  const std::vector<LinkSpec>& links() const { return links_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const Pose& base() const { return base_; }

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;

  /// Upper bound on the distance from the base origin to any link surface
  /// point over all configurations.
  double reach() const { return reach_; }

  /// Content hash over kinematics and geometry parameters.
  std::uint64_t hash() const { return hash_; }

  /// Copy with a different base mount pose.
  RobotModel with_base(const Pose& base) const;

 private:
  std::string name_;
  std::vector<LinkSpec> links_;
  std::vector<JointSpec> joints_;
  Pose base_;
  double reach_ = 0.0;
  std::uint64_t hash_ = 0;
};

/// Parses a robot description (docs/formats.md). Mesh paths are resolved
/// relative to `base_dir`.
RobotModel parse_robot(std::string_view text, const std::string& source_name,
                       const std::filesystem::path& base_dir);
RobotModel load_robot(const std::filesystem::path& path);

/// World pose of every link; element 0 is the base mount pose.
std::vector<Pose> forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q);

/// World pose of every joint frame after rotation (pose of link i+1), with
/// the world-frame axis, used for analytic kinematic derivatives.
struct JointFrame {
  Eigen::Vector3d origin;
  Eigen::Vector3d axis;
};
std::vector<JointFrame> joint_frames(const RobotModel& model, const std::vector<Pose>& link_poses);

}  // namespace kinsdf
