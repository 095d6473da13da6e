#include "kinsdf/composite.hpp"

#include <map>

#include "kinsdf/checkpoint.hpp"
#include "kinsdf/errors.hpp"
#include "kinsdf/text_document.hpp"

namespace kinsdf {

namespace {

void check_part(const ChainPart& part) {
  if (!part.model || !part.field) throw InvalidArgument("chain '" + part.name + "' needs a robot model and a field");
  if (part.field->dof() != part.model->dof() || part.field->link_count() != part.model->link_count()) {
    throw MismatchError("field of chain '" + part.name + "' does not match its robot (dof/link count)");
  }
  if (!part.base.is_valid()) throw InvalidArgument("chain '" + part.name + "' has an invalid base pose");
}

}  // namespace

CompositeSystem::CompositeSystem(ChainPart arm, std::size_t mount_link, Pose mount_offset, std::vector<ChainPart> hand)
    : arm_(std::move(arm)), mount_link_(mount_link), mount_offset_(mount_offset), hand_(std::move(hand)) {
  check_part(arm_);
  for (const ChainPart& c : hand_) check_part(c);
  if (mount_link_ >= arm_.model->link_count()) throw InvalidArgument("mount link index out of range");
  if (!mount_offset_.is_valid()) throw InvalidArgument("mount offset is not a rigid transform");

  auto add = [&](const ChainPart& part, int chain) {
    link_offset_.push_back(registry_.size());
    joint_offset_.push_back(dof_);
    for (std::size_t k = 0; k < part.model->link_count(); ++k) {
      registry_.push_back({part.name + "." + part.model->links()[k].name, chain, k});
    }
    dof_ += part.model->dof();
  };
  add(arm_, -1);
  for (std::size_t j = 0; j < hand_.size(); ++j) add(hand_[j], static_cast<int>(j));
}

std::size_t CompositeSystem::link_index(const std::string& name) const {
  for (std::size_t i = 0; i < registry_.size(); ++i) {
    if (registry_[i].name == name) return i;
  }
  throw InvalidArgument("unknown link '" + name + "'");
}

std::size_t CompositeSystem::chain_offset(int chain) const { return joint_offset_[static_cast<std::size_t>(chain + 1)]; }

Eigen::VectorXd CompositeSystem::lower_limits() const {
  Eigen::VectorXd lo(static_cast<Eigen::Index>(dof_));
  lo.head(static_cast<Eigen::Index>(arm_.model->dof())) = arm_.model->lower_limits();
  for (std::size_t j = 0; j < hand_.size(); ++j) {
    lo.segment(static_cast<Eigen::Index>(joint_offset_[j + 1]), static_cast<Eigen::Index>(hand_[j].model->dof())) =
        hand_[j].model->lower_limits();
  }
  return lo;
}

Eigen::VectorXd CompositeSystem::upper_limits() const {
  Eigen::VectorXd hi(static_cast<Eigen::Index>(dof_));
  hi.head(static_cast<Eigen::Index>(arm_.model->dof())) = arm_.model->upper_limits();
  for (std::size_t j = 0; j < hand_.size(); ++j) {
    hi.segment(static_cast<Eigen::Index>(joint_offset_[j + 1]), static_cast<Eigen::Index>(hand_[j].model->dof())) =
        hand_[j].model->upper_limits();
  }
  return hi;
}

Pose CompositeSystem::hand_frame(const Eigen::VectorXd& q_arm) const {
  return forward_kinematics(*arm_.model, q_arm)[mount_link_] * mount_offset_;
}

Eigen::MatrixXd CompositeSystem::query_impl(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points, bool exact) const {
  if (static_cast<std::size_t>(q.size()) != dof_) {
    throw DimensionMismatch("configuration has " + std::to_string(q.size()) + " entries, system has " + std::to_string(dof_));
  }
  if (!points.allFinite()) throw InvalidArgument("query points must be finite");
  const Eigen::Index b = points.cols();
  Eigen::MatrixXd out(b, static_cast<Eigen::Index>(registry_.size()));

  auto run = [&](const ChainPart& part, std::size_t part_index, const Eigen::Matrix3Xd& p) {
    const auto m = static_cast<Eigen::Index>(part.model->dof());
    const Eigen::MatrixXd qs = q.segment(static_cast<Eigen::Index>(joint_offset_[part_index]), m).replicate(1, b);
    const Eigen::MatrixXd d = exact ? OracleField(*part.model).predict(qs, p) : part.field->predict(qs, p);
    out.middleCols(static_cast<Eigen::Index>(link_offset_[part_index]), d.rows()) = d.transpose();
  };
  run(arm_, 0, points);
  if (!hand_.empty()) {
    const Pose h = hand_frame(q.head(static_cast<Eigen::Index>(arm_.model->dof())));
    for (std::size_t j = 0; j < hand_.size(); ++j) {
      const Pose t = h * hand_[j].base;
      const Eigen::Matrix3Xd local = t.rotation.transpose() * (points.colwise() - t.translation);
      run(hand_[j], j + 1, local);
    }
  }
  return out;
}

Eigen::MatrixXd CompositeSystem::query(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points) const {
  return query_impl(q, points, false);
}

Eigen::MatrixXd CompositeSystem::query_exact(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points) const {
  return query_impl(q, points, true);
}

Eigen::VectorXd CompositeSystem::query_gradient(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& points,
                                                const Eigen::MatrixXd& weights, Eigen::MatrixXd* values) const {
  if (static_cast<std::size_t>(q.size()) != dof_) throw DimensionMismatch("configuration has wrong length");
  const Eigen::Index b = points.cols();
  if (weights.rows() != b || weights.cols() != static_cast<Eigen::Index>(registry_.size())) {
    throw DimensionMismatch("weights must be |points| x link_count");
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof_));
  if (values) values->resize(b, static_cast<Eigen::Index>(registry_.size()));

  // Returns the point gradients (3 x B) in the part's query frame.
  auto part_vjp = [&](const ChainPart& part, std::size_t part_index, const Eigen::Matrix3Xd& p) -> Eigen::Matrix3Xd {
    const auto m = static_cast<Eigen::Index>(part.model->dof());
    const auto n = static_cast<Eigen::Index>(part.model->link_count());
    const auto q0 = static_cast<Eigen::Index>(joint_offset_[part_index]);
    const auto l0 = static_cast<Eigen::Index>(link_offset_[part_index]);
    const Eigen::MatrixXd w = weights.middleCols(l0, n).transpose();
    Eigen::MatrixXd d;
    const Eigen::MatrixXd g = part.field->vjp(q.segment(q0, m), p, w, values ? &d : nullptr);
    if (values) values->middleCols(l0, n) = d.transpose();
    grad.segment(q0, m) += g.topRows(m).rowwise().sum();
    return g.bottomRows(3);
  };

  part_vjp(arm_, 0, points);
  if (hand_.empty()) return grad;

  const auto m_arm = static_cast<Eigen::Index>(arm_.model->dof());
  const std::vector<Pose> arm_poses = forward_kinematics(*arm_.model, q.head(m_arm));
  const std::vector<JointFrame> frames = joint_frames(*arm_.model, arm_poses);
  const Pose h = arm_poses[mount_link_] * mount_offset_;
  for (std::size_t j = 0; j < hand_.size(); ++j) {
    const Pose t = h * hand_[j].base;
    const Eigen::Matrix3Xd local = t.rotation.transpose() * (points.colwise() - t.translation);
    const Eigen::Matrix3Xd dlocal = part_vjp(hand_[j], j + 1, local);
    // p_local = R^T (p - t); rotating joint i about (o, a) moves it by
    // -R^T (a x (p - o)), so d/dq_i = -a . sum_b (p_b - o) x (R g_b).
    const Eigen::Matrix3Xd v = t.rotation * dlocal;
    Eigen::Vector3d pxv = Eigen::Vector3d::Zero();
    for (Eigen::Index c = 0; c < b; ++c) pxv += points.col(c).cross(v.col(c));
    const Eigen::Vector3d vsum = v.rowwise().sum();
    for (std::size_t i = 0; i < mount_link_; ++i) {
      const JointFrame& f = frames[i];
      grad[static_cast<Eigen::Index>(i)] -= f.axis.dot(pxv - f.origin.cross(vsum));
    }
  }
  return grad;
}

CompositeSystem load_system(const std::filesystem::path& path) {
  const TextDocument doc = TextDocument::load(path);
  const std::filesystem::path dir = path.parent_path();
  std::map<std::string, std::shared_ptr<const RobotModel>> robots;
  std::map<std::string, std::shared_ptr<const DistanceField>> fields;

  auto part_from = [&](const TextTable& t, const std::string& default_name) {
    ChainPart part;
    const std::string robot_file = (dir / t.string("robot")).string();
    if (!robots.count(robot_file)) robots[robot_file] = std::make_shared<const RobotModel>(load_robot(robot_file));
    part.model = robots[robot_file];
    part.name = t.string_or("name", default_name);
    if (t.has("checkpoint")) {
      const std::string ckpt_file = (dir / t.string("checkpoint")).string();
      if (!fields.count(ckpt_file)) {
        Checkpoint ck = read_checkpoint(ckpt_file);
        if (ck.meta.robot_hash != part.model->hash()) {
          throw MismatchError(ckpt_file + " was trained for a different robot than " + robot_file);
        }
        fields[ckpt_file] = std::make_shared<const NeuralField>(std::move(ck.field));
      }
      part.field = fields[ckpt_file];
    } else {
      auto model = part.model;
      // The oracle holds a reference; keep the model alive alongside it.
      struct OwningOracle final : DistanceField {
        std::shared_ptr<const RobotModel> model;
        OracleField oracle;
        explicit OwningOracle(std::shared_ptr<const RobotModel> m) : model(std::move(m)), oracle(*model) {}
        std::size_t dof() const override { return oracle.dof(); }
        std::size_t link_count() const override { return oracle.link_count(); }
        Eigen::MatrixXd predict(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const override {
          return oracle.predict(q, p);
        }
        std::string describe() const override { return oracle.describe(); }
      };
      part.field = std::make_shared<const OwningOracle>(model);
    }
    part.base = Pose::from_xyz_rpy(t.vec3_or("base_xyz", Eigen::Vector3d::Zero()), t.vec3_or("base_rpy", Eigen::Vector3d::Zero()));
    return part;
  };

  const TextTable* arm_table = doc.table("arm");
  if (!arm_table) throw ParseError(path.string() + ": missing [arm] table");
  ChainPart arm = part_from(*arm_table, "arm");
  const double mount_link = arm_table->number_or("mount_link", static_cast<double>(arm.model->link_count() - 1));
  if (mount_link < 0 || mount_link != static_cast<double>(static_cast<std::size_t>(mount_link))) {
    throw ParseError(path.string() + ": mount_link must be a non-negative integer");
  }
  const Pose offset = Pose::from_xyz_rpy(arm_table->vec3_or("mount_xyz", Eigen::Vector3d::Zero()),
                                         arm_table->vec3_or("mount_rpy", Eigen::Vector3d::Zero()));
  std::vector<ChainPart> hand;
  int index = 0;
  for (const TextTable& t : doc.array("chain")) hand.push_back(part_from(t, "chain" + std::to_string(index++)));
  return CompositeSystem(std::move(arm), static_cast<std::size_t>(mount_link), offset, std::move(hand));
}

}  // namespace kinsdf
