#include "kinsdf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "kinsdf/errors.hpp"
#include "kinsdf/rng.hpp"

namespace kinsdf {

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh " + path.string());
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad vertex");
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(i > 0 ? i - 1 : static_cast<int>(mesh.vertices.size()) + i);
      }
      if (idx.size() != 3) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": only triangular faces are supported");
      }
      for (int i : idx) {
        if (i < 0 || i >= static_cast<int>(mesh.vertices.size())) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": face index out of range");
        }
      }
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  return mesh;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

double signed_volume(const TriangleMesh& mesh) {
  double v = 0.0;
  for (const auto& f : mesh.faces) {
    v += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
  }
  return v / 6.0;
}

double surface_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (const auto& f : mesh.faces) {
    a += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]).norm();
  }
  return a;
}

void validate_closed_mesh(const TriangleMesh& mesh) {
  if (mesh.faces.size() < 4) throw OpenMeshError("mesh has fewer than 4 faces");
  // Directed edge counts: a closed, consistently oriented mesh uses each
  // directed edge once and its reverse once.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f[e];
      const int b = f[(e + 1) % 3];
      if (a == b) throw OpenMeshError("degenerate face with repeated vertex");
      ++directed[{a, b}];
    }
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) throw OpenMeshError("inconsistent orientation or non-manifold edge");
    auto rev = directed.find({edge.second, edge.first});
    if (rev == directed.end()) {
      throw OpenMeshError("open boundary at edge (" + std::to_string(edge.first) + ", " +
                          std::to_string(edge.second) + ")");
    }
  }
  if (signed_volume(mesh) <= 0.0) throw OpenMeshError("mesh faces point inward (non-positive volume)");
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

MeshDistance::MeshDistance(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  order_.resize(mesh_.faces.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) build(0, static_cast<int>(order_.size()));
  cumulative_area_.reserve(mesh_.faces.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < mesh_.faces.size(); ++f) {
    const auto t = triangle(static_cast<int>(f));
    acc += 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
    cumulative_area_.push_back(acc);
  }
}

std::array<Eigen::Vector3d, 3> MeshDistance::triangle(int face) const {
  const auto& f = mesh_.faces[face];
  return {mesh_.vertices[f[0]], mesh_.vertices[f[1]], mesh_.vertices[f[2]]};
}

Eigen::Vector3d MeshDistance::face_normal(std::size_t face) const {
  const auto t = triangle(static_cast<int>(face));
  return (t[1] - t[0]).cross(t[2] - t[0]).normalized();
}

Eigen::AlignedBox3d MeshDistance::bounds() const {
  return nodes_.empty() ? Eigen::AlignedBox3d() : nodes_.front().box;
}

int MeshDistance::build(int first, int count) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroids;
  for (int i = first; i < first + count; ++i) {
    const auto t = triangle(order_[i]);
    for (const auto& v : t) box.extend(v);
    centroids.extend((t[0] + t[1] + t[2]) / 3.0);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroids.sizes().maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](int a, int b) {
                     const auto ta = triangle(a);
                     const auto tb = triangle(b);
                     return (ta[0] + ta[1] + ta[2])[axis] < (tb[0] + tb[1] + tb[2])[axis];
                   });
  const int left = build(first, mid - first);
  const int right = build(mid, first + count - mid);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

double MeshDistance::unsigned_distance(const Eigen::Vector3d& p) const {
  if (nodes_.empty()) return std::numeric_limits<double>::infinity();
  double best2 = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.box.squaredExteriorDistance(p) >= best2) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto t = triangle(order_[i]);
        best2 = std::min(best2, (closest_point_on_triangle(p, t[0], t[1], t[2]) - p).squaredNorm());
      }
      continue;
    }
    // Visit the nearer child first.
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    if (dl < dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return std::sqrt(best2);
}

double MeshDistance::unsigned_distance_brute_force(const Eigen::Vector3d& p) const {
  double best2 = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < mesh_.faces.size(); ++f) {
    const auto t = triangle(static_cast<int>(f));
    best2 = std::min(best2, (closest_point_on_triangle(p, t[0], t[1], t[2]) - p).squaredNorm());
  }
  return std::sqrt(best2);
}

namespace {

bool ray_hits_box(const Eigen::AlignedBox3d& box, const Eigen::Vector3d& o, const Eigen::Vector3d& inv_dir) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    double t0 = (box.min()[a] - o[a]) * inv_dir[a];
    double t1 = (box.max()[a] - o[a]) * inv_dir[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

// Moller-Trumbore, counting hits with t > 0.
bool ray_hits_triangle(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& a,
                       const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a;
  const Eigen::Vector3d e2 = c - a;
  const Eigen::Vector3d h = d.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = o - a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return false;
  const Eigen::Vector3d qv = s.cross(e1);
  const double v = inv * d.dot(qv);
  if (v < 0.0 || u + v > 1.0) return false;
  return inv * e2.dot(qv) > 0.0;
}

const std::array<Eigen::Vector3d, 3>& parity_directions() {
  static const std::array<Eigen::Vector3d, 3> dirs = [] {
    Rng rng(0x7261797061726974ULL);
    return std::array<Eigen::Vector3d, 3>{rng.unit_vector(), rng.unit_vector(), rng.unit_vector()};
  }();
  return dirs;
}

}  // namespace

int MeshDistance::ray_crossings(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  if (nodes_.empty()) return 0;
  const Eigen::Vector3d inv = dir.cwiseInverse();
  int hits = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!ray_hits_box(node.box, origin, inv)) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto t = triangle(order_[i]);
        if (ray_hits_triangle(origin, dir, t[0], t[1], t[2])) ++hits;
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return hits;
}

bool MeshDistance::inside(const Eigen::Vector3d& p) const {
  if (nodes_.empty() || !nodes_.front().box.contains(p)) return false;
  int votes = 0;
  for (const auto& d : parity_directions()) votes += ray_crossings(p, d) % 2;
  return votes >= 2;
}

double MeshDistance::signed_distance(const Eigen::Vector3d& p) const {
  const double d = unsigned_distance(p);
  return inside(p) ? -d : d;
}

}  // namespace kinsdf
