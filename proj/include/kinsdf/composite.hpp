#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/field.hpp"
#include "kinsdf/pose.hpp"
#include "kinsdf/robot_model.hpp"

namespace kinsdf {

/// One kinematic chain of the composite: its robot description and the
/// field that answers distance queries in the chain's own frame.
struct ChainPart {
  std::string name;
  std::shared_ptr<const RobotModel> model;
  std::shared_ptr<const DistanceField> field;
  /// Chain base in the hand frame (hand chains only).
  Pose base = Pose::identity();
};

struct LinkEntry {
  std::string name;  // "<chain>.<link>"
  int chain = -1;  // -1 for the arm
  std::size_t local = 0;
};

/// Arm plus hand chains with global link numbering: arm links first, then each
/// chain's links in order. The hand frame is H(q_arm) = FK_arm[mount_link] * mount_offset.
class CompositeSystem {
 public:
  CompositeSystem(ChainPart arm, std::size_t mount_link, Pose mount_offset, std::vector<ChainPart> hand);

  std::size_t dof() const { return dof_; }
  std::size_t link_count() const { return registry_.size(); }
  const std::vector<LinkEntry>& registry() const { return registry_; }
  /// Global link index for "<chain>.<link>"; throws InvalidArgument.
  std::size_t link_index(const std::string& name) const;
  const ChainPart& arm() const { return arm_; }
  const std::vector<ChainPart>& hand() const { return hand_; }
  std::size_t mount_link() const { return mount_link_; }
  const Pose& mount_offset() const { return mount_offset_; }

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  /// Start offset of each chain's joints in the combined vector (arm = 0).
  std::size_t chain_offset(int chain) const;

  Pose hand_frame(const Eigen::VectorXd& q_arm) const;

  /// Distances, |points| x link_count(), columns in registry order.
  Eigen::MatrixXd query(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points) const;
  /// Same through the exact oracle of every part's robot model.
  Eigen::MatrixXd query_exact(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points) const;

  /// Gradient with respect to q of sum(weights .* query(q, points)), with the
  /// mount transform differentiated analytically. `values` receives the query.
  Eigen::VectorXd query_gradient(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points,
                                 const Eigen::MatrixXd& weights, Eigen::MatrixXd* values = nullptr) const;

 private:
  Eigen::MatrixXd query_impl(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points, bool exact) const;

  ChainPart arm_;
  std::size_t mount_link_;
  Pose mount_offset_;
  std::vector<ChainPart> hand_;
  std::vector<LinkEntry> registry_;
  std::vector<std::size_t> link_offset_;  // per part: arm, then chains
  std::vector<std::size_t> joint_offset_;
  std::size_t dof_ = 0;
};

/// Reads a system description (docs/formats.md): robot files, optional field
/// checkpoints (the exact oracle stands in when absent) and mount poses.
CompositeSystem load_system(const std::filesystem::path& path);

}  // namespace kinsdf
