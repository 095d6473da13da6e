#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace kinsdf {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
};

/// ASCII OBJ: `v x y z` and triangular `f a b c` records (1-based indices,
/// `a/b/c` forms accepted, texture/normal indices ignored). Polygons with
/// more than three vertices are rejected.
TriangleMesh load_obj(const std::filesystem::path& path);
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Throws OpenMeshError unless every undirected edge is used by exactly two
/// faces with opposite orientation and the enclosed volume is positive
/// (outward-facing winding).
void validate_closed_mesh(const TriangleMesh& mesh);

double signed_volume(const TriangleMesh& mesh);
double surface_area(const TriangleMesh& mesh);

/// Closest point on triangle (a, b, c) to p.
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// Point-to-mesh distance queries over a bounding-volume hierarchy
/// (median split on the longest centroid axis, at most 8 triangles per leaf).
/// Inside/outside is decided by ray parity along three fixed directions with
/// a majority vote.
class MeshDistance {
 public:
  explicit MeshDistance(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }

  double unsigned_distance(const Eigen::Vector3d& p) const;
  /// Exhaustive minimum over all triangles.
  double unsigned_distance_brute_force(const Eigen::Vector3d& p) const;
  bool inside(const Eigen::Vector3d& p) const;
  /// Parity of crossings along a single ray (odd = inside vote).
  int ray_crossings(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
  double signed_distance(const Eigen::Vector3d& p) const;

  Eigen::AlignedBox3d bounds() const;
  /// Cumulative triangle areas, for area-weighted surface sampling.
  const std::vector<double>& cumulative_area() const { return cumulative_area_; }
  Eigen::Vector3d face_normal(std::size_t face) const;

  static constexpr int kLeafSize = 8;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;
    int right = -1;
    int first = 0;  // into order_
    int count = 0;
  };

  int build(int first, int count);
  std::array<Eigen::Vector3d, 3> triangle(int face) const;

  TriangleMesh mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  std::vector<double> cumulative_area_;
};

}  // namespace kinsdf
