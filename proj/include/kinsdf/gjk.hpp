#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kinsdf/pose.hpp"

namespace kinsdf {

/// Convex hull of its vertices (local frame, meters).
struct ConvexShape {
  std::vector<Eigen::Vector3d> vertices;
  /// Allows fewer than four or coplanar vertices (points, segments, triangles).
  bool degenerate = false;

  /// Throws InvalidGeometryError unless there are >= 4 non-coplanar vertices
  /// or the shape is flagged degenerate.
  void validate() const;
  Eigen::Vector3d centroid() const;
};

struct GjkResult {
  double distance = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Closest point on the Minkowski difference A - B.
  Eigen::Vector3d separation = Eigen::Vector3d::Zero();
};

inline constexpr int kGjkMaxIterations = 64;
inline constexpr double kGjkTolerance = 1e-9;

/// Separation distance between two posed convex shapes (0 when they
/// intersect). Without a penetration phase, so no depth is computed.
GjkResult gjk_distance(const ConvexShape& a, const Pose& pose_a, const ConvexShape& b, const Pose& pose_b);

/// Closest point to the origin on the convex hull of up to four points;
/// `weights` receives barycentric coordinates (exhaustive sub-simplex search).
Eigen::Vector3d closest_point_on_simplex(const std::vector<Eigen::Vector3d>& simplex, std::vector<double>& weights);

}  // namespace kinsdf
