#include <doctest.h>
#include <fstream>

#include "kinsdf/errors.hpp"
#include "kinsdf/mesh.hpp"
#include "kinsdf/rng.hpp"
#include "test_support.hpp"

using namespace kinsdf;

namespace {

TriangleMesh unit_cube() { return load_obj(test::fixture("robots/meshes/cube.obj")); }

// Exact signed distance of the axis-aligned cube [-0.5, 0.5]^3.
double cube_sdf(const Eigen::Vector3d& p) {
  const Eigen::Vector3d d = p.cwiseAbs() - Eigen::Vector3d::Constant(0.5);
  return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
}

}  // namespace

TEST_CASE("cube fixture is closed with unit volume and area 6") {
  const TriangleMesh m = unit_cube();
  CHECK(m.vertices.size() == 8);
  CHECK(m.faces.size() == 12);
  CHECK_NOTHROW(validate_closed_mesh(m));
  CHECK(signed_volume(m) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(surface_area(m) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("open and inverted meshes are rejected") {
  TriangleMesh open = unit_cube();
  open.faces.pop_back();
  CHECK_THROWS_AS(validate_closed_mesh(open), OpenMeshError);
  TriangleMesh flipped = unit_cube();
  for (auto& f : flipped.faces) std::swap(f[1], f[2]);
  CHECK_THROWS_AS(validate_closed_mesh(flipped), OpenMeshError);
  TriangleMesh mixed = unit_cube();
  std::swap(mixed.faces[0][1], mixed.faces[0][2]);
  CHECK_THROWS_AS(validate_closed_mesh(mixed), OpenMeshError);
}

TEST_CASE("closest point on triangle regions") {
  const Eigen::Vector3d a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  CHECK((closest_point_on_triangle({0.2, 0.2, 1.0}, a, b, c) - Eigen::Vector3d(0.2, 0.2, 0)).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({-1, -1, 0}, a, b, c) - a).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({2, -1, 0}, a, b, c) - b).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({0.5, -1, 3}, a, b, c) - Eigen::Vector3d(0.5, 0, 0)).norm() <= 1e-15);
  CHECK((closest_point_on_triangle({1, 1, 0}, a, b, c) - Eigen::Vector3d(0.5, 0.5, 0)).norm() <= 1e-15);
}

TEST_CASE("BVH distance equals brute force and the analytic cube distance") {
  const MeshDistance md(unit_cube());
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const double bvh = md.unsigned_distance(p);
    CHECK(bvh == md.unsigned_distance_brute_force(p));
    CHECK(md.signed_distance(p) == doctest::Approx(cube_sdf(p)).epsilon(1e-12));
  }
}

TEST_CASE("ray parity votes and inside test") {
  const MeshDistance md(unit_cube());
  CHECK(md.inside(Eigen::Vector3d(0.1, 0.2, -0.3)));
  CHECK_FALSE(md.inside(Eigen::Vector3d(0.7, 0.0, 0.0)));
  CHECK(md.ray_crossings(Eigen::Vector3d::Zero(), Eigen::Vector3d(0.3, 0.5, 0.8).normalized()) % 2 == 1);
  CHECK(md.ray_crossings(Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(1, 0.1, 0.05).normalized()) == 0);
}

TEST_CASE("OBJ round trip and malformed files") {
  const auto dir = test::scratch_dir("mesh");
  write_obj(unit_cube(), dir / "c.obj");
  const TriangleMesh back = load_obj(dir / "c.obj");
  CHECK(back.faces == unit_cube().faces);
  CHECK(back.vertices == unit_cube().vertices);
  {
    std::ofstream(dir / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    std::ofstream(dir / "bad.obj") << "v 0 0 0\nf 1 2 3\n";
  }
  CHECK_THROWS_AS(load_obj(dir / "quad.obj"), ParseError);
  CHECK_THROWS_AS(load_obj(dir / "bad.obj"), ParseError);
  CHECK_THROWS_AS(load_obj(dir / "none.obj"), IoError);
}
