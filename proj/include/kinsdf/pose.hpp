#pragma once

#include <Eigen/Dense>

namespace kinsdf {

/// Rigid transform: rotation followed by translation (meters).
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }
  static Pose from_translation(const Eigen::Vector3d& t);
  /// Fixed-axis roll/pitch/yaw, R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Pose from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy);
  /// Rotation of `angle` radians about the unit `axis`.
  static Pose from_axis_angle(const Eigen::Vector3d& axis, double angle);
  static Pose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p) const {
    return rotation.transpose() * (p - translation);
  }
  Eigen::Matrix4d matrix() const;
  /// Orthonormality and det = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

Pose compose(const Pose& parent, const Pose& child);
Pose inverse(const Pose& pose);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

}  // namespace kinsdf
