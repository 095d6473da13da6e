#pragma once

#include <memory>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "kinsdf/mesh.hpp"
#include "kinsdf/rng.hpp"

namespace kinsdf {

struct Sphere {
  double radius = 0.0;
};

/// Segment from (0,0,-half_length) to (0,0,+half_length) swept by `radius`.
struct Capsule {
  double half_length = 0.0;
  double radius = 0.0;
};

struct Box {
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
};

struct MeshShape {
  std::string file;
  std::shared_ptr<const MeshDistance> mesh;
};

using Geometry = std::variant<Sphere, Capsule, Box, MeshShape>;

/// Signed distance in the geometry's own frame; negative inside.
double local_signed_distance(const Geometry& g, const Eigen::Vector3d& p);

double geometry_area(const Geometry& g);

/// Largest distance from the local origin to any surface point.
double bounding_radius(const Geometry& g);

struct SurfaceSample {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // outward, unit
};

/// Area-uniform point on the surface with its outward normal.
SurfaceSample sample_surface(const Geometry& g, Rng& rng);

const char* geometry_kind(const Geometry& g);

}  // namespace kinsdf
