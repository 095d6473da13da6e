#include "kinsdf/gjk.hpp"

#include <limits>

#include "kinsdf/errors.hpp"

namespace kinsdf {

void ConvexShape::validate() const {
  if (vertices.empty()) throw InvalidGeometryError("convex shape has no vertices");
  if (degenerate) return;
  if (vertices.size() < 4) throw InvalidGeometryError("convex shape needs at least 4 vertices");
  Eigen::Matrix3Xd centered(3, vertices.size());
  const Eigen::Vector3d c = centroid();
  for (std::size_t i = 0; i < vertices.size(); ++i) centered.col(static_cast<Eigen::Index>(i)) = vertices[i] - c;
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  const auto& s = svd.singularValues();
  if (s(2) <= 1e-12 * std::max(1.0, s(0))) throw InvalidGeometryError("convex shape vertices are coplanar");
}

Eigen::Vector3d ConvexShape::centroid() const {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& v : vertices) c += v;
  return c / static_cast<double>(vertices.size());
}

Eigen::Vector3d closest_point_on_simplex(const std::vector<Eigen::Vector3d>& simplex, std::vector<double>& weights) {
  const int n = static_cast<int>(simplex.size());
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best_point = simplex.front();
  weights.assign(simplex.size(), 0.0);
  weights[0] = 1.0;

  for (int mask = 1; mask < (1 << n); ++mask) {
    int idx[4];
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) idx[k++] = i;
    }
    // Origin projected onto the affine hull: x = p0 + sum_j l_j (p_j - p0).
    Eigen::Vector4d lambda = Eigen::Vector4d::Zero();
    Eigen::Vector3d point;
    if (k == 1) {
      lambda(0) = 1.0;
      point = simplex[idx[0]];
    } else {
      const Eigen::Vector3d& p0 = simplex[idx[0]];
      Eigen::Matrix3d e;
      for (int j = 1; j < k; ++j) e.col(j - 1) = simplex[idx[j]] - p0;
      const auto ek = e.leftCols(k - 1);
      const Eigen::MatrixXd gram = ek.transpose() * ek;
      const Eigen::VectorXd rhs = -(ek.transpose() * p0);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) continue;
      const Eigen::VectorXd t = ldlt.solve(rhs);
      lambda(0) = 1.0 - t.sum();
      for (int j = 1; j < k; ++j) lambda(j) = t(j - 1);
      point = p0 + ek * t;
    }
    bool interior = true;
    for (int j = 0; j < k; ++j) interior = interior && lambda(j) >= 0.0;
    if (!interior) continue;
    const double d = point.squaredNorm();
    if (d < best) {
      best = d;
      best_point = point;
      weights.assign(simplex.size(), 0.0);
      for (int j = 0; j < k; ++j) weights[idx[j]] = lambda(j);
    }
  }
  return best_point;
}

namespace {

const Eigen::Vector3d& support(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& dir) {
  std::size_t best = 0;
  double best_dot = pts[0].dot(dir);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].dot(dir);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return pts[best];
}

}  // namespace

GjkResult gjk_distance(const ConvexShape& a, const Pose& pose_a, const ConvexShape& b, const Pose& pose_b) {
  std::vector<Eigen::Vector3d> wa;
  std::vector<Eigen::Vector3d> wb;
  wa.reserve(a.vertices.size());
  wb.reserve(b.vertices.size());
  for (const auto& v : a.vertices) wa.push_back(pose_a.apply(v));
  for (const auto& v : b.vertices) wb.push_back(pose_b.apply(v));

  GjkResult result;
  // Centroid difference lies inside A - B; swapping A and B negates every
  // quantity below, which keeps the distance exactly symmetric.
  Eigen::Vector3d ca = Eigen::Vector3d::Zero();
  Eigen::Vector3d cb = Eigen::Vector3d::Zero();
  for (const auto& v : wa) ca += v;
  for (const auto& v : wb) cb += v;
  Eigen::Vector3d v = ca / static_cast<double>(wa.size()) - cb / static_cast<double>(wb.size());

  std::vector<Eigen::Vector3d> simplex;
  std::vector<double> weights;
  double best_norm = v.norm();
  Eigen::Vector3d best_v = v;

  for (int it = 0; it < kGjkMaxIterations; ++it) {
    result.iterations = it + 1;
    const double vnorm = v.norm();
    if (vnorm <= kGjkTolerance) {
      result.distance = 0.0;
      result.converged = true;
      result.separation = v;
      return result;
    }
    const Eigen::Vector3d w = support(wa, -v) - support(wb, v);
    // Support gap: upper bound on how far |v| is above the true distance.
    const double gap = (v.squaredNorm() - v.dot(w)) / vnorm;
    if (gap <= kGjkTolerance) {
      result.distance = vnorm;
      result.converged = true;
      result.separation = v;
      return result;
    }
    bool duplicate = false;
    for (const auto& s : simplex) duplicate = duplicate || (s - w).squaredNorm() == 0.0;
    if (duplicate) break;  // numerically stalled

    simplex.push_back(w);
    v = closest_point_on_simplex(simplex, weights);
    std::vector<Eigen::Vector3d> reduced;
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (weights[i] > 0.0) reduced.push_back(simplex[i]);
    }
    simplex = std::move(reduced);
    if (simplex.size() == 4) {
      // Origin strictly inside a tetrahedron of A - B.
      result.distance = 0.0;
      result.converged = true;
      result.separation = Eigen::Vector3d::Zero();
      return result;
    }
    if (v.norm() < best_norm) {
      best_norm = v.norm();
      best_v = v;
    }
  }
  result.distance = best_norm;
  result.separation = best_v;
  result.converged = false;
  return result;
}

}  // namespace kinsdf
