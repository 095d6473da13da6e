#include <doctest.h>

#include "kinsdf/pose.hpp"
#include "kinsdf/rng.hpp"

using namespace kinsdf;

namespace {

Pose random_pose(Rng& rng) {
  return Pose::from_xyz_rpy(Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                            Eigen::Vector3d(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3)));
}

double pose_gap(const Pose& a, const Pose& b) { return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("compose with identity and inverse") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    CHECK(pose_gap(compose(Pose::identity(), p), p) == 0.0);
    CHECK(pose_gap(compose(p, inverse(p)), Pose::identity()) <= 1e-12);
    CHECK(p.is_valid());
  }
}

TEST_CASE("composition matches the homogeneous matrix product") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Pose c = random_pose(rng);
    CHECK(pose_gap(a * b, Pose::from_matrix(a.matrix() * b.matrix())) <= 1e-12);
    CHECK(pose_gap((a * b) * c, a * (b * c)) <= 1e-12);
    const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK((a.apply_inverse(a.apply(x)) - x).norm() <= 1e-12);
  }
}

TEST_CASE("rpy and axis-angle constructors") {
  const Pose yaw = Pose::from_xyz_rpy(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, M_PI / 2));
  CHECK((yaw.apply(Eigen::Vector3d::UnitX()) - Eigen::Vector3d::UnitY()).norm() <= 1e-15);
  const Pose aa = Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), M_PI / 2);
  CHECK(pose_gap(yaw, aa) <= 1e-15);
  // R = Rz * Ry * Rx
  const Eigen::Vector3d rpy(0.3, -0.4, 1.1);
  const Eigen::Matrix3d expect = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                                  Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                                  Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                                     .toRotationMatrix();
  CHECK((Pose::from_xyz_rpy(Eigen::Vector3d::Zero(), rpy).rotation - expect).cwiseAbs().maxCoeff() <= 1e-15);

  Pose bad;
  bad.rotation(0, 0) = 2.0;
  CHECK_FALSE(bad.is_valid());
  bad.rotation = -Eigen::Matrix3d::Identity();
  CHECK_FALSE(bad.is_valid());
}
