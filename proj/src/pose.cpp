#include "kinsdf/pose.hpp"

#include <cmath>

namespace kinsdf {

Pose Pose::from_translation(const Eigen::Vector3d& t) {
  Pose p;
  p.translation = t;
  return p;
}

Pose Pose::from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
  Pose p;
  p.rotation = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                   .toRotationMatrix();
  p.translation = xyz;
  return p;
}

Pose Pose::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  // Rodrigues; axis assumed unit.
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  Pose p;
  p.rotation = Eigen::Matrix3d::Identity() + s * k + (1.0 - c) * (k * k);
  return p;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Pose compose(const Pose& parent, const Pose& child) {
  Pose out;
  out.rotation = parent.rotation * child.rotation;
  out.translation = parent.rotation * child.translation + parent.translation;
  return out;
}

Pose inverse(const Pose& pose) {
  Pose out;
  out.rotation = pose.rotation.transpose();
  out.translation = -(out.rotation * pose.translation);
  return out;
}

}  // namespace kinsdf
