#pragma once

#include <string>

#include <Eigen/Dense>

#include "kinsdf/robot_model.hpp"

namespace kinsdf {

/// Anything that maps (q, p) pairs to n link distances: the learned
/// network or the exact oracle.
class DistanceField {
 public:
  virtual ~DistanceField() = default;
  virtual std::size_t dof() const = 0;
  virtual std::size_t link_count() const = 0;
  /// Column b of the result holds the n distances for (q.col(b), p.col(b)).
  virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const = 0;
  /// Input gradient of sum_b weights.col(b) . d(q, p_b) for points sharing
  /// one configuration, (m+3) x B. The default uses central differences of
  /// predict(); `values` receives the n x B distances when non-null.
  virtual Eigen::MatrixXd vjp(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& p, const Eigen::MatrixXd& weights,
                              Eigen::MatrixXd* values = nullptr) const;
  virtual std::size_t parameter_count() const { return 0; }
  virtual std::string describe() const = 0;
};

/// Exact ground truth exposed through the field interface.
class OracleField final : public DistanceField {
 public:
  explicit OracleField(const RobotModel& model) : model_(model) {}
  std::size_t dof() const override { return model_.dof(); }
  std::size_t link_count() const override { return model_.link_count(); }
  Eigen::MatrixXd predict(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const override;
  std::string describe() const override { return "oracle(" + model_.name() + ")"; }

 private:
  const RobotModel& model_;
};

}  // namespace kinsdf
