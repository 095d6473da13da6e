#include "kinsdf/distance_oracle.hpp"

#include <cmath>

#include "kinsdf/errors.hpp"
#include "kinsdf/field.hpp"

namespace kinsdf {

double link_signed_distance(const RobotModel& model, std::size_t k, const Pose& link_pose, const Eigen::Vector3d& p) {
  const LinkSpec& link = model.links()[k];
  const Eigen::Vector3d local = link.origin.apply_inverse(link_pose.apply_inverse(p));
  const double d = local_signed_distance(link.geometry, local);
  return std::abs(d) <= kSurfaceEpsilon ? 0.0 : d;
}

Eigen::VectorXd signed_distance_vector(const RobotModel& model, const std::vector<Pose>& link_poses,
                                       const Eigen::Vector3d& p) {
  if (link_poses.size() != model.link_count()) throw DimensionMismatch("link pose count does not match the model");
  Eigen::VectorXd d(static_cast<Eigen::Index>(model.link_count()));
  for (std::size_t k = 0; k < model.link_count(); ++k) {
    d[static_cast<Eigen::Index>(k)] = link_signed_distance(model, k, link_poses[k], p);
  }
  return d;
}

Eigen::VectorXd signed_distance_vector(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::Vector3d& p) {
  return signed_distance_vector(model, forward_kinematics(model, q), p);
}

OracleKind oracle_kind(const RobotModel& model) {
  bool mesh = false;
  bool primitive = false;
  for (const auto& link : model.links()) {
    (std::holds_alternative<MeshShape>(link.geometry) ? mesh : primitive) = true;
  }
  if (mesh && primitive) return OracleKind::mixed;
  return mesh ? OracleKind::mesh : OracleKind::primitives;
}

const char* oracle_kind_name(OracleKind kind) {
  switch (kind) {
    case OracleKind::primitives:
      return "primitives";
    case OracleKind::mesh:
      return "mesh";
    case OracleKind::mixed:
      return "mixed";
  }
  return "unknown";
}

}  // namespace kinsdf

namespace kinsdf {

Eigen::MatrixXd OracleField::predict(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const {
  if (q.rows() != static_cast<Eigen::Index>(model_.dof()) || q.cols() != p.cols()) {
    throw DimensionMismatch("oracle query shapes do not match the robot");
  }
  Eigen::MatrixXd out(model_.link_count(), q.cols());
  std::vector<Pose> poses;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    // Consecutive queries often share a configuration; reuse its FK.
    if (c == 0 || q.col(c) != q.col(c - 1)) poses = forward_kinematics(model_, q.col(c));
    out.col(c) = signed_distance_vector(model_, poses, p.col(c));
  }
  return out;
}

}  // namespace kinsdf

namespace kinsdf {

Eigen::MatrixXd DistanceField::vjp(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& p, const Eigen::MatrixXd& weights,
                                   Eigen::MatrixXd* values) const {
  const auto m = static_cast<Eigen::Index>(dof());
  const Eigen::Index b = p.cols();
  if (q.size() != m || weights.rows() != static_cast<Eigen::Index>(link_count()) || weights.cols() != b) {
    throw DimensionMismatch("vjp: shapes do not match the field");
  }
  constexpr double h = 1e-6;
  Eigen::MatrixXd qs = q.replicate(1, b);
  if (values) *values = predict(qs, p);
  Eigen::MatrixXd grad(m + 3, b);
  for (Eigen::Index i = 0; i < m + 3; ++i) {
    Eigen::MatrixXd qp = qs;
    Eigen::MatrixXd qm = qs;
    Eigen::Matrix3Xd pp = p;
    Eigen::Matrix3Xd pm = p;
    if (i < m) {
      qp.row(i).array() += h;
      qm.row(i).array() -= h;
    } else {
      pp.row(i - m).array() += h;
      pm.row(i - m).array() -= h;
    }
    const Eigen::MatrixXd diff = (predict(qp, pp) - predict(qm, pm)) / (2.0 * h);
    grad.row(i) = diff.cwiseProduct(weights).colwise().sum();
  }
  return grad;
}

}  // namespace kinsdf
