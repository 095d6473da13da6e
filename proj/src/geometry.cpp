#include "kinsdf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kinsdf {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double box_sdf(const Eigen::Vector3d& he, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = p.cwiseAbs() - he;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

}  // namespace

double local_signed_distance(const Geometry& g, const Eigen::Vector3d& p) {
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return p.norm() - s.radius; },
                        [&](const Capsule& c) {
                          const double z = std::clamp(p.z(), -c.half_length, c.half_length);
                          return Eigen::Vector3d(p.x(), p.y(), p.z() - z).norm() - c.radius;
                        },
                        [&](const Box& b) { return box_sdf(b.half_extents, p); },
                        [&](const MeshShape& m) { return m.mesh->signed_distance(p); },
                    },
                    g);
}

double geometry_area(const Geometry& g) {
  using std::numbers::pi;
  return std::visit(Overloaded{
                        [](const Sphere& s) { return 4.0 * pi * s.radius * s.radius; },
                        [](const Capsule& c) {
                          return 4.0 * pi * c.radius * c.radius + 2.0 * pi * c.radius * 2.0 * c.half_length;
                        },
                        [](const Box& b) {
                          const auto& h = b.half_extents;
                          return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
                        },
                        [](const MeshShape& m) {
                          const auto& cum = m.mesh->cumulative_area();
                          return cum.empty() ? 0.0 : cum.back();
                        },
                    },
                    g);
}

double bounding_radius(const Geometry& g) {
  return std::visit(Overloaded{
                        [](const Sphere& s) { return s.radius; },
                        [](const Capsule& c) { return c.half_length + c.radius; },
                        [](const Box& b) { return b.half_extents.norm(); },
                        [](const MeshShape& m) {
                          double r = 0.0;
                          for (const auto& v : m.mesh->mesh().vertices) r = std::max(r, v.norm());
                          return r;
                        },
                    },
                    g);
}

SurfaceSample sample_surface(const Geometry& g, Rng& rng) {
  using std::numbers::pi;
  return std::visit(
      Overloaded{
          [&](const Sphere& s) {
            const Eigen::Vector3d n = rng.unit_vector();
            return SurfaceSample{s.radius * n, n};
          },
          [&](const Capsule& c) {
            const double cap = 4.0 * pi * c.radius * c.radius;
            const double side = 4.0 * pi * c.radius * c.half_length;
            if (rng.uniform() * (cap + side) < cap) {
              const Eigen::Vector3d n = rng.unit_vector();
              const double z = n.z() >= 0.0 ? c.half_length : -c.half_length;
              return SurfaceSample{Eigen::Vector3d(0, 0, z) + c.radius * n, n};
            }
            const double phi = rng.uniform(0.0, 2.0 * pi);
            const double z = rng.uniform(-c.half_length, c.half_length);
            const Eigen::Vector3d n(std::cos(phi), std::sin(phi), 0.0);
            return SurfaceSample{Eigen::Vector3d(c.radius * n.x(), c.radius * n.y(), z), n};
          },
          [&](const Box& b) {
            const auto& h = b.half_extents;
            // Face pairs normal to x, y, z weighted by area.
            const double ax = h.y() * h.z();
            const double ay = h.x() * h.z();
            const double az = h.x() * h.y();
            const double u = rng.uniform() * (ax + ay + az);
            const int axis = u < ax ? 0 : (u < ax + ay ? 1 : 2);
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            Eigen::Vector3d p(rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()), rng.uniform(-h.z(), h.z()));
            p[axis] = sign * h[axis];
            Eigen::Vector3d n = Eigen::Vector3d::Zero();
            n[axis] = sign;
            return SurfaceSample{p, n};
          },
          [&](const MeshShape& m) {
            const auto& cum = m.mesh->cumulative_area();
            const double u = rng.uniform() * cum.back();
            const auto face = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            const auto f = m.mesh->mesh().faces[std::min(face, cum.size() - 1)];
            double r1 = rng.uniform();
            double r2 = rng.uniform();
            if (r1 + r2 > 1.0) {
              r1 = 1.0 - r1;
              r2 = 1.0 - r2;
            }
            const auto& v = m.mesh->mesh().vertices;
            const Eigen::Vector3d p = v[f[0]] + r1 * (v[f[1]] - v[f[0]]) + r2 * (v[f[2]] - v[f[0]]);
            return SurfaceSample{p, m.mesh->face_normal(std::min(face, cum.size() - 1))};
          },
      },
      g);
}

const char* geometry_kind(const Geometry& g) {
  return std::visit(Overloaded{
                        [](const Sphere&) { return "sphere"; },
                        [](const Capsule&) { return "capsule"; },
                        [](const Box&) { return "box"; },
                        [](const MeshShape&) { return "mesh"; },
                    },
                    g);
}

}  // namespace kinsdf
