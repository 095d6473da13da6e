#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "kinsdf/errors.hpp"
#include "kinsdf/hashing.hpp"
#include "kinsdf/sampler.hpp"
#include "test_support.hpp"

using namespace kinsdf;

namespace {

RobotModel one_joint(double lo, double hi) {
  std::vector<LinkSpec> links(2);
  for (auto& l : links) l.geometry = Sphere{0.1};
  std::vector<JointSpec> joints(1);
  joints[0].lower = lo;
  joints[0].upper = hi;
  return RobotModel("one", links, joints);
}

SamplerConfig small_config(const RobotModel& r, std::uint64_t configs, std::uint64_t seed) {
  SamplerConfig c = SamplerConfig::defaults_for(r);
  c.configs_count = configs;
  c.points_per_config = 200;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("configuration sampling respects the expanded limits") {
  const RobotModel r = one_joint(-1, 1);
  Rng rng(1);
  double lo = INFINITY, hi = -INFINITY;
  for (int i = 0; i < 100000; ++i) {
    const double q0 = sample_configuration(r, 0.0, rng)[0];
    CHECK((q0 >= -1.0 && q0 <= 1.0));
    const double q = sample_configuration(r, 0.05, rng)[0];
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  // e = 0.05 * (hi - lo) = 0.1
  CHECK(lo >= -1.1);
  CHECK(hi <= 1.1);
  CHECK(lo < -1.099);
  CHECK(hi > 1.099);

  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(sample_configuration(r, 0.05, a) == sample_configuration(r, 0.05, b));
}

TEST_CASE("near-surface sampling stays within the band") {
  const RobotModel sphere = test::robot("sphere");
  Rng rng(2);
  for (const auto& p : sample_near_surface(sphere, Eigen::VectorXd(0), 0.05, 2000, rng)) {
    CHECK(std::abs(p.norm() - 0.05) <= 0.05 + 1e-15);
  }
  const RobotModel arm = test::robot("arm3");
  const Eigen::Vector3d q(0.3, -0.5, 1.0);
  const double ds = 0.05 * arm.reach();
  int violations = 0;
  for (const auto& p : sample_near_surface(arm, q, ds, 10000, rng)) {
    violations += std::abs(signed_distance_vector(arm, q, p).minCoeff()) <= ds ? 0 : 1;
  }
  CHECK(violations == 0);
  CHECK_THROWS_AS(sample_near_surface(arm, q, 0.0, 10, rng), InvalidArgument);
}

TEST_CASE("generated dataset: size, balance, labels and tags") {
  const RobotModel arm = test::robot("arm3");
  const SamplerConfig cfg = small_config(arm, 1000, 7);
  const SdfDataset ds = generate_dataset(arm, cfg);
  REQUIRE(ds.size() == 200000);
  CHECK(ds.meta.robot_hash == arm.hash());
  CHECK(ds.meta.dof == 3);
  CHECK(ds.meta.links == 4);
  const double inside = ds.inside_fraction();
  MESSAGE("inside fraction " << inside);
  CHECK(inside >= 0.48);
  CHECK(inside <= 0.52);

  Rng pick(3);
  for (int s = 0; s < 2000; ++s) {
    const auto i = static_cast<Eigen::Index>(pick.index(ds.size()));
    CHECK(ds.d.col(i) == signed_distance_vector(arm, ds.q.col(i), ds.p.col(i)));
  }
  std::size_t near = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double m = ds.d.col(static_cast<Eigen::Index>(i)).minCoeff();
    const bool tag_inside = (ds.tags[i] & kTagInside) != 0;
    if (tag_inside != (m < 0)) FAIL("inside tag disagrees with the minimum distance at record " << i);
    if ((ds.tags[i] & kTagNearSurface) != 0) {
      ++near;
      if (std::abs(m) > cfg.d_s) FAIL("near-surface record outside the band at " << i);
    }
  }
  CHECK(near >= ds.size() / 2);
  // Records are grouped by configuration index.
  CHECK(std::is_sorted(ds.config_index.begin(), ds.config_index.end()));
  for (std::size_t i = 1; i < ds.size(); ++i) {
    if (ds.config_index[i] == ds.config_index[i - 1] &&
        ds.q.col(static_cast<Eigen::Index>(i)) != ds.q.col(static_cast<Eigen::Index>(i - 1))) {
      FAIL("configuration changes inside a group at " << i);
    }
  }
}

TEST_CASE("determinism, worker independence and file round trip") {
  const RobotModel arm = test::robot("arm3");
  SamplerConfig cfg = small_config(arm, 40, 11);
  const auto dir = test::scratch_dir("sampler");
  const SdfDataset a = generate_dataset(arm, cfg);
  cfg.workers = 3;
  const SdfDataset b = generate_dataset(arm, cfg);
  write_dataset(a, dir / "a.ksd");
  write_dataset(b, dir / "b.ksd");
  CHECK(hash_file(dir / "a.ksd") == hash_file(dir / "b.ksd"));

  const SdfDataset back = read_dataset(dir / "a.ksd");
  CHECK(back.q == a.q);
  CHECK(back.p == a.p);
  CHECK(back.d == a.d);
  CHECK(back.tags == a.tags);
  CHECK(back.config_index == a.config_index);
  CHECK(back.meta.config.d_s == a.meta.config.d_s);
  CHECK(back.meta.config.seed == 11);
  CHECK(back.meta.robot_name == "arm3");

  export_dataset_csv(a, dir / "a.csv");
  std::ifstream csv(dir / "a.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == a.size() + 1);

  std::filesystem::resize_file(dir / "a.ksd", std::filesystem::file_size(dir / "a.ksd") - 3);
  CHECK_THROWS_AS(read_dataset(dir / "a.ksd"), ParseError);
  CHECK_THROWS_AS(read_dataset(dir / "missing.ksd"), IoError);
}

TEST_CASE("independent seeds give disjoint configurations") {
  const RobotModel arm = test::robot("arm3");
  const SdfDataset a = generate_dataset(arm, small_config(arm, 50, 1));
  const SdfDataset b = generate_dataset(arm, small_config(arm, 50, 2));
  std::set<double> first;
  for (Eigen::Index i = 0; i < a.q.cols(); ++i) first.insert(a.q(0, i));
  for (Eigen::Index i = 0; i < b.q.cols(); ++i) CHECK(first.count(b.q(0, i)) == 0);
}

TEST_CASE("mesh robots are sampled through the mesh oracle") {
  const RobotModel r = test::robot("mesh_pendulum");
  const SdfDataset ds = generate_dataset(r, small_config(r, 20, 5));
  CHECK(ds.meta.oracle == OracleKind::mixed);
  CHECK(ds.inside_fraction() >= 0.48);
  CHECK(ds.inside_fraction() <= 0.52);
}

TEST_CASE("config validation") {
  const RobotModel arm = test::robot("arm3");
  SamplerConfig c = SamplerConfig::defaults_for(arm);
  CHECK(c.d_s == doctest::Approx(0.05 * arm.reach()));
  CHECK_NOTHROW(c.validate(arm));
  c.d_s = 0;
  CHECK_THROWS_AS(c.validate(arm), InvalidArgument);
  c = SamplerConfig::defaults_for(arm);
  c.workspace = Eigen::AlignedBox3d(Eigen::Vector3d::Constant(-0.1), Eigen::Vector3d::Constant(0.1));
  CHECK_THROWS_AS(c.validate(arm), InvalidArgument);
  c = SamplerConfig::defaults_for(arm);
  c.inside_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(arm), InvalidArgument);
}
