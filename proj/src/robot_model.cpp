#include "kinsdf/robot_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kinsdf/errors.hpp"
#include "kinsdf/hashing.hpp"
#include "kinsdf/text_document.hpp"

namespace kinsdf {

namespace {

void hash_pose(Fnv1a& h, const Pose& p) {
  for (int i = 0; i < 9; ++i) h.update_double(p.rotation.data()[i]);
  for (int i = 0; i < 3; ++i) h.update_double(p.translation[i]);
}

void validate_geometry(const LinkSpec& link) {
  const auto fail = [&](const std::string& what) {
    throw InvalidGeometryError("link '" + link.name + "': " + what);
  };
  if (const auto* s = std::get_if<Sphere>(&link.geometry)) {
    if (!(s->radius > 0.0)) fail("sphere radius must be positive");
  } else if (const auto* c = std::get_if<Capsule>(&link.geometry)) {
    if (!(c->radius > 0.0) || !(c->half_length > 0.0)) fail("capsule radius and half_length must be positive");
  } else if (const auto* b = std::get_if<Box>(&link.geometry)) {
    if (!(b->half_extents.minCoeff() > 0.0)) fail("box half_extents must be positive");
  } else if (const auto* m = std::get_if<MeshShape>(&link.geometry)) {
    if (!m->mesh) fail("mesh not loaded");
  }
  if (!link.origin.is_valid()) fail("geometry origin is not a rigid transform");
}

}  // namespace

RobotModel::RobotModel(std::string name, std::vector<LinkSpec> links, std::vector<JointSpec> joints, Pose base)
    : name_(std::move(name)), links_(std::move(links)), joints_(std::move(joints)), base_(base) {
  if (links_.size() != joints_.size() + 1) {
    throw ParseError("robot '" + name_ + "': serial chain needs exactly one more link than joints (" +
                     std::to_string(links_.size()) + " links, " + std::to_string(joints_.size()) + " joints)");
  }
  if (!base_.is_valid()) throw InvalidArgument("robot '" + name_ + "': base pose is not a rigid transform");
  for (const auto& link : links_) validate_geometry(link);
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const auto& j = joints_[i];
    if (j.parent_link != i) {
      throw ParseError("joint '" + j.name + "': parent must be link " + std::to_string(i) + " in a serial chain");
    }
    if (!j.axis.allFinite() || std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw NonUnitAxisError("joint '" + j.name + "': rotation axis must have unit norm");
    }
    if (!(j.lower < j.upper)) {
      throw InvalidLimitsError("joint '" + j.name + "': lower limit must be below upper limit");
    }
    if (!j.origin.is_valid()) throw InvalidArgument("joint '" + j.name + "': origin is not a rigid transform");
  }

  double along = 0.0;
  for (std::size_t k = 0; k < links_.size(); ++k) {
    if (k > 0) along += joints_[k - 1].origin.translation.norm();
    reach_ = std::max(reach_, along + links_[k].origin.translation.norm() + bounding_radius(links_[k].geometry));
  }

  Fnv1a h;
  h.update(name_);
  hash_pose(h, base_);
  for (const auto& link : links_) {
    h.update(geometry_kind(link.geometry));
    hash_pose(h, link.origin);
    std::visit(
        [&](const auto& g) {
          using T = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            h.update_double(g.radius);
          } else if constexpr (std::is_same_v<T, Capsule>) {
            h.update_double(g.half_length);
            h.update_double(g.radius);
          } else if constexpr (std::is_same_v<T, Box>) {
            for (int i = 0; i < 3; ++i) h.update_double(g.half_extents[i]);
          } else {
            for (const auto& v : g.mesh->mesh().vertices) {
              for (int i = 0; i < 3; ++i) h.update_double(v[i]);
            }
            for (const auto& f : g.mesh->mesh().faces) h.update(f.data(), sizeof f);
          }
        },
        link.geometry);
  }
  for (const auto& j : joints_) {
    hash_pose(h, j.origin);
    for (int i = 0; i < 3; ++i) h.update_double(j.axis[i]);
    h.update_double(j.lower);
    h.update_double(j.upper);
  }
  hash_ = h.digest();
}

Eigen::VectorXd RobotModel::lower_limits() const {
  Eigen::VectorXd v(joints_.size());
  for (std::size_t i = 0; i < joints_.size(); ++i) v[i] = joints_[i].lower;
  return v;
}

Eigen::VectorXd RobotModel::upper_limits() const {
  Eigen::VectorXd v(joints_.size());
  for (std::size_t i = 0; i < joints_.size(); ++i) v[i] = joints_[i].upper;
  return v;
}

RobotModel RobotModel::with_base(const Pose& base) const { return RobotModel(name_, links_, joints_, base); }

RobotModel parse_robot(std::string_view text, const std::string& source_name, const std::filesystem::path& base_dir) {
  const TextDocument doc = TextDocument::parse(text, source_name);
  const TextTable& root = doc.root();
  const std::string name = root.string_or("name", "robot");
  const Pose base = Pose::from_xyz_rpy(root.vec3_or("base_xyz", Eigen::Vector3d::Zero()),
                                       root.vec3_or("base_rpy", Eigen::Vector3d::Zero()));

  std::vector<LinkSpec> links;
  for (const TextTable& t : doc.array("link")) {
    LinkSpec link;
    link.name = t.string_or("name", "link" + std::to_string(links.size()));
    link.origin = Pose::from_xyz_rpy(t.vec3_or("origin_xyz", Eigen::Vector3d::Zero()),
                                     t.vec3_or("origin_rpy", Eigen::Vector3d::Zero()));
    const std::string kind = t.string("geometry");
    if (kind == "sphere") {
      link.geometry = Sphere{t.number("radius")};
    } else if (kind == "capsule") {
      link.geometry = Capsule{t.number("half_length"), t.number("radius")};
    } else if (kind == "box") {
      link.geometry = Box{t.vec3("half_extents")};
    } else if (kind == "mesh") {
      const std::string file = t.string("file");
      TriangleMesh mesh = load_obj(base_dir / file);
      const double scale = t.number_or("scale", 1.0);
      for (auto& v : mesh.vertices) v *= scale;
      try {
        validate_closed_mesh(mesh);
      } catch (const OpenMeshError& e) {
        throw OpenMeshError("link '" + link.name + "' mesh " + file + ": " + e.what());
      }
      link.geometry = MeshShape{file, std::make_shared<const MeshDistance>(std::move(mesh))};
    } else {
      throw ParseError(t.context + ": unknown geometry '" + kind + "' (sphere, capsule, box, mesh)");
    }
    links.push_back(std::move(link));
  }

  std::vector<JointSpec> joints;
  for (const TextTable& t : doc.array("joint")) {
    JointSpec j;
    j.name = t.string_or("name", "joint" + std::to_string(joints.size()));
    const std::string type = t.string_or("type", "revolute");
    if (type != "revolute") {
      throw UnsupportedJointError("joint '" + j.name + "': type '" + type + "' is not supported (revolute only)");
    }
    j.parent_link = static_cast<std::size_t>(t.number_or("parent", static_cast<double>(joints.size())));
    j.origin = Pose::from_xyz_rpy(t.vec3_or("origin_xyz", Eigen::Vector3d::Zero()),
                                  t.vec3_or("origin_rpy", Eigen::Vector3d::Zero()));
    j.axis = t.vec3("axis");
    const auto limits = t.numbers("limits");
    if (limits.size() != 2) throw ParseError(t.context + ": limits must be [lower, upper]");
    j.lower = limits[0];
    j.upper = limits[1];
    joints.push_back(std::move(j));
  }
  if (links.empty()) throw ParseError(source_name + ": robot has no [[link]] entries");
  return RobotModel(name, std::move(links), std::move(joints), base);
}

RobotModel load_robot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open robot description " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_robot(ss.str(), path.filename().string(), path.parent_path());
}

std::vector<Pose> forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != model.dof()) {
    throw DimensionMismatch("configuration has " + std::to_string(q.size()) + " entries, robot '" + model.name() +
                            "' has " + std::to_string(model.dof()) + " joints");
  }
  std::vector<Pose> poses;
  poses.reserve(model.link_count());
  poses.push_back(model.base());
  for (std::size_t i = 0; i < model.dof(); ++i) {
    const auto& j = model.joints()[i];
    poses.push_back(poses.back() * j.origin * Pose::from_axis_angle(j.axis, q[static_cast<Eigen::Index>(i)]));
  }
  return poses;
}

std::vector<JointFrame> joint_frames(const RobotModel& model, const std::vector<Pose>& link_poses) {
  std::vector<JointFrame> frames;
  frames.reserve(model.dof());
  for (std::size_t i = 0; i < model.dof(); ++i) {
    // The joint rotates about its own axis, so the child pose carries it.
    const Pose& child = link_poses[i + 1];
    frames.push_back({child.translation, child.rotation * model.joints()[i].axis});
  }
  return frames;
}

}  // namespace kinsdf
