// Acceptance run: one PASS/FAIL line per criterion. Every tolerance and
// runtime limit is pinned below; nothing is read from the environment.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "kinsdf/composite.hpp"
#include "kinsdf/distance_oracle.hpp"
#include "kinsdf/errors.hpp"
#include "kinsdf/evaluator.hpp"
#include "kinsdf/gjk.hpp"
#include "kinsdf/grasp.hpp"
#include "kinsdf/hashing.hpp"
#include "kinsdf/mesh.hpp"
#include "kinsdf/neural_field.hpp"
#include "kinsdf/rng.hpp"
#include "kinsdf/robot_model.hpp"
#include "kinsdf/sampler.hpp"
#include "kinsdf/trainer.hpp"

namespace fs = std::filesystem;
using namespace kinsdf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path fixture(const std::string& rel) { return fs::path(KINSDF_FIXTURES) / rel; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double seconds, double limit_seconds) {
  const bool in_time = seconds <= limit_seconds;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s  [%2d] %s: %s; %.1f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", id, title.c_str(),
              o.detail.c_str(), seconds, limit_seconds, in_time ? "" : " OVER TIME");
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Pose random_pose(Rng& rng, double spread) {
  const Eigen::Vector3d t(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-spread, spread));
  Pose p = Pose::from_axis_angle(rng.unit_vector(), rng.uniform(0.0, std::numbers::pi));
  p.translation = t;
  return p;
}

// ---------------------------------------------------------------------------
// 1. Oracle exactness

// Dense structured surface grids with outward normals, spacing at most `s`.
struct SurfaceCloud {
  Eigen::Matrix3Xd points;
  Eigen::Matrix3Xd normals;
};

void push(std::vector<Eigen::Vector3d>& p, std::vector<Eigen::Vector3d>& n, const Eigen::Vector3d& a,
          const Eigen::Vector3d& b) {
  p.push_back(a);
  n.push_back(b);
}

SurfaceCloud to_cloud(const std::vector<Eigen::Vector3d>& p, const std::vector<Eigen::Vector3d>& n) {
  SurfaceCloud c;
  c.points.resize(3, static_cast<Eigen::Index>(p.size()));
  c.normals.resize(3, static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    c.points.col(static_cast<Eigen::Index>(i)) = p[i];
    c.normals.col(static_cast<Eigen::Index>(i)) = n[i];
  }
  return c;
}

// Sphere-cap rows from polar angle th0 to th1 around `center`.
void spherical_zone(double r, double th0, double th1, const Eigen::Vector3d& center, double s,
                    std::vector<Eigen::Vector3d>& p, std::vector<Eigen::Vector3d>& n) {
  const int rows = static_cast<int>(std::ceil(r * (th1 - th0) / s)) + 1;
  for (int i = 0; i < rows; ++i) {
    const double th = th0 + (th1 - th0) * i / (rows - 1);
    const int ring = std::max(1, static_cast<int>(std::ceil(2 * std::numbers::pi * r * std::sin(th) / s)));
    for (int j = 0; j < ring; ++j) {
      const double ph = 2 * std::numbers::pi * j / ring;
      const Eigen::Vector3d u(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
      push(p, n, center + r * u, u);
    }
  }
}

SurfaceCloud dense_surface(const Geometry& g, double s) {
  std::vector<Eigen::Vector3d> p, n;
  if (const auto* sp = std::get_if<Sphere>(&g)) {
    spherical_zone(sp->radius, 0.0, std::numbers::pi, Eigen::Vector3d::Zero(), s, p, n);
  } else if (const auto* c = std::get_if<Capsule>(&g)) {
    const double h = c->half_length, r = c->radius;
    const int rows = static_cast<int>(std::ceil(2 * h / s)) + 1;
    const int ring = static_cast<int>(std::ceil(2 * std::numbers::pi * r / s));
    for (int i = 0; i < rows; ++i) {
      const double z = -h + 2 * h * i / (rows - 1);
      for (int j = 0; j < ring; ++j) {
        const double ph = 2 * std::numbers::pi * j / ring;
        const Eigen::Vector3d u(std::cos(ph), std::sin(ph), 0.0);
        push(p, n, r * u + Eigen::Vector3d(0, 0, z), u);
      }
    }
    spherical_zone(r, 0.0, std::numbers::pi / 2, Eigen::Vector3d(0, 0, h), s, p, n);
    spherical_zone(r, std::numbers::pi / 2, std::numbers::pi, Eigen::Vector3d(0, 0, -h), s, p, n);
  } else if (const auto* b = std::get_if<Box>(&g)) {
    const Eigen::Vector3d e = b->half_extents;
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const int nu = static_cast<int>(std::ceil(2 * e[u] / s)) + 1;
      const int nv = static_cast<int>(std::ceil(2 * e[v] / s)) + 1;
      for (double side : {-1.0, 1.0}) {
        for (int i = 0; i < nu; ++i) {
          for (int j = 0; j < nv; ++j) {
            Eigen::Vector3d x;
            x[axis] = side * e[axis];
            x[u] = -e[u] + 2 * e[u] * i / (nu - 1);
            x[v] = -e[v] + 2 * e[v] * j / (nv - 1);
            Eigen::Vector3d nn = Eigen::Vector3d::Zero();
            nn[axis] = side;
            push(p, n, x, nn);
          }
        }
      }
    }
  }
  return to_cloud(p, n);
}

// Distance to the set of medial points of the shape's interior, or +inf
// outside (the outside distance is C1 for these shapes).
double medial_gap(const Geometry& g, const Eigen::Vector3d& x) {
  if (const auto* sp = std::get_if<Sphere>(&g)) {
    return x.norm() < sp->radius ? x.norm() : INFINITY;
  }
  if (const auto* c = std::get_if<Capsule>(&g)) {
    const double z = std::clamp(x.z(), -c->half_length, c->half_length);
    const double to_axis = (x - Eigen::Vector3d(0, 0, z)).norm();
    return to_axis < c->radius ? to_axis : INFINITY;
  }
  const auto& b = std::get<Box>(g);
  std::array<double, 3> gaps{};
  for (int i = 0; i < 3; ++i) gaps[static_cast<std::size_t>(i)] = b.half_extents[i] - std::abs(x[i]);
  if (*std::min_element(gaps.begin(), gaps.end()) <= 0.0) return INFINITY;
  std::sort(gaps.begin(), gaps.end());
  return gaps[1] - gaps[0];
}

Outcome criterion_oracle() {
  constexpr int kQueries = 10000;
  constexpr double kSpacing = 0.0005;   // brute-force grid spacing
  constexpr double kTolerance = 1e-3;   // analytic vs brute force, m
  constexpr double kEikonal = 1e-4;     // | |grad d| - 1 |
  constexpr double kFdStep = 1e-6;
  constexpr double kMedialExclusion = 1e-3;

  struct Case {
    const char* kind;
    Geometry g;
  };
  std::vector<Case> cases;
  cases.push_back({"sphere", Sphere{0.05}});
  cases.push_back({"capsule", Capsule{0.06, 0.03}});
  cases.push_back({"box", Box{Eigen::Vector3d(0.05, 0.03, 0.02)}});

  Rng rng(101);
  bool ok = true;
  std::ostringstream detail;
  for (const Case& c : cases) {
    LinkSpec link{"solid", c.g, random_pose(rng, 0.05)};
    const RobotModel model(std::string("single_") + c.kind, {link}, {});
    const SurfaceCloud cloud = dense_surface(c.g, kSpacing);
    const double extent = bounding_radius(c.g);

    double worst = 0.0, worst_eik = 0.0;
    int eik_checked = 0;
    for (int i = 0; i < kQueries; ++i) {
      const Pose link_pose = random_pose(rng, 0.3);
      const Pose shape = link_pose * link.origin;
      Eigen::Vector3d local;
      if (i % 2 == 0) {
        for (int r = 0; r < 3; ++r) local[r] = rng.uniform(-extent - 0.05, extent + 0.05);
      } else {
        const SurfaceSample s = sample_surface(c.g, rng);
        local = s.point + rng.uniform(-0.005, 0.005) * s.normal;
      }
      const Eigen::Vector3d p = shape.apply(local);
      const double analytic = link_signed_distance(model, 0, link_pose, p);

      // Brute force in the world frame: nearest grid sample. Edge and corner
      // samples repeat once per face; the point is outside iff it lies on the
      // outer side of some copy's face.
      const Eigen::Matrix3Xd world = (shape.rotation * cloud.points).colwise() + shape.translation;
      const Eigen::VectorXd d2 = (world.colwise() - p).colwise().squaredNorm();
      const double dist = std::sqrt(d2.minCoeff());
      double side = -INFINITY;
      for (Eigen::Index j = 0; j < d2.size(); ++j) {
        if (std::sqrt(d2[j]) <= dist + 1e-9) side = std::max(side, (p - world.col(j)).dot(shape.rotation * cloud.normals.col(j)));
      }
      const double brute = side >= 0.0 ? dist : -dist;
      worst = std::max(worst, std::abs(analytic - brute));

      if (std::abs(analytic) > 10 * kFdStep && medial_gap(c.g, local) > kMedialExclusion) {
        Eigen::Vector3d grad;
        for (int a = 0; a < 3; ++a) {
          Eigen::Vector3d e = Eigen::Vector3d::Zero();
          e[a] = kFdStep;
          grad[a] = (link_signed_distance(model, 0, link_pose, p + e) - link_signed_distance(model, 0, link_pose, p - e)) /
                    (2 * kFdStep);
        }
        worst_eik = std::max(worst_eik, std::abs(grad.norm() - 1.0));
        ++eik_checked;
      }
    }
    const bool case_ok = worst <= kTolerance && worst_eik <= kEikonal && eik_checked >= kQueries / 2;
    ok = ok && case_ok;
    detail << c.kind << " max|err| " << fmt("%.2e", worst) << " m, eikonal " << fmt("%.1e", worst_eik) << " ("
           << eik_checked << " pts); ";
  }
  detail << "limits " << kTolerance << " m / " << kEikonal;
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. GJK correctness

double point_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

double point_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& c) {
  const Eigen::Vector3d nrm = (b - a).cross(c - a);
  double best = std::min({point_segment(p, a, b), point_segment(p, b, c), point_segment(p, c, a)});
  const double nn = nrm.squaredNorm();
  if (nn > 1e-20) {
    const Eigen::Vector3d proj = p - (p - a).dot(nrm) / nn * nrm;
    // Inside test by consistent orientation of the three sub-triangles.
    const double s1 = (b - a).cross(proj - a).dot(nrm);
    const double s2 = (c - b).cross(proj - b).dot(nrm);
    const double s3 = (a - c).cross(proj - c).dot(nrm);
    if (s1 >= 0 && s2 >= 0 && s3 >= 0) best = std::min(best, (p - proj).norm());
  }
  return best;
}

// Minimum over a fine parameter sweep refined by ternary search on the
// convex function t -> dist(segment1(t), segment2).
double segment_segment(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1, const Eigen::Vector3d& b0,
                       const Eigen::Vector3d& b1) {
  auto f = [&](double t) { return point_segment(a0 + t * (a1 - a0), b0, b1); };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) <= f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min({f(0.5 * (lo + hi)), f(0.0), f(1.0)});
}

// Exact distance between two separated convex hulls: the closest pair lies
// on a vertex/face or edge/edge pair, and every face is covered by some
// vertex triple, every edge by some vertex pair.
double hull_distance_enumerated(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b) {
  double best = INFINITY;
  auto vertex_faces = [&](const std::vector<Eigen::Vector3d>& pts, const std::vector<Eigen::Vector3d>& hull) {
    const std::size_t n = hull.size();
    for (const auto& p : pts) {
      for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, (p - hull[i]).norm());
        for (std::size_t j = i + 1; j < n; ++j) {
          for (std::size_t k = j + 1; k < n; ++k) best = std::min(best, point_triangle(p, hull[i], hull[j], hull[k]));
        }
      }
    }
  };
  vertex_faces(a, b);
  vertex_faces(b, a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      for (std::size_t k = 0; k < b.size(); ++k) {
        for (std::size_t l = k + 1; l < b.size(); ++l) best = std::min(best, segment_segment(a[i], a[j], b[k], b[l]));
      }
    }
  }
  return best;
}

Outcome criterion_gjk() {
  constexpr int kPairs = 1000;
  constexpr double kTolerance = 1e-6;
  constexpr double kSymmetry = 1e-12;
  Rng rng(202);
  double worst = 0.0, worst_sym = 0.0;
  int separated = 0, touching = 0, unconverged = 0;
  for (int t = 0; t < kPairs; ++t) {
    auto polytope = [&] {
      ConvexShape s;
      const int count = 4 + static_cast<int>(rng.index(9));
      for (int i = 0; i < count; ++i) {
        s.vertices.emplace_back(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
      }
      return s;
    };
    ConvexShape a = polytope(), b = polytope();
    const Pose pa = random_pose(rng, 0.1);
    Pose pb = random_pose(rng, 0.1);
    std::vector<Eigen::Vector3d> wa, wb;
    for (const auto& v : a.vertices) wa.push_back(pa.apply(v));
    double expect = 0.0;
    if (t % 5 == 4) {
      // Overlap by construction: both hulls contain the same world point.
      const Eigen::Vector3d shared = wa[rng.index(wa.size())];
      b.vertices.back() = pb.apply_inverse(shared);
      for (const auto& v : b.vertices) wb.push_back(pb.apply(v));
      ++touching;
    } else {
      // Separate along u: B's lowest projection above A's highest by a gap.
      const Eigen::Vector3d u = rng.unit_vector();
      for (const auto& v : b.vertices) wb.push_back(pb.apply(v));
      double a_max = -INFINITY, b_min = INFINITY;
      for (const auto& v : wa) a_max = std::max(a_max, u.dot(v));
      for (const auto& v : wb) b_min = std::min(b_min, u.dot(v));
      const double gap = t % 5 == 3 ? std::pow(10.0, rng.uniform(-6.0, -3.0)) : rng.uniform(0.001, 0.1);
      const Eigen::Vector3d shift = (a_max - b_min + gap) * u;
      pb.translation += shift;
      for (auto& v : wb) v += shift;
      expect = hull_distance_enumerated(wa, wb);
      ++separated;
    }
    const GjkResult ab = gjk_distance(a, pa, b, pb);
    const GjkResult ba = gjk_distance(b, pb, a, pa);
    if (!ab.converged || !ba.converged) ++unconverged;
    worst = std::max(worst, std::abs(ab.distance - expect));
    worst_sym = std::max(worst_sym, std::abs(ab.distance - ba.distance));
  }
  const bool ok = worst <= kTolerance && worst_sym <= kSymmetry && unconverged == 0;
  return {ok, fmt("%d separated + %d overlapping pairs, max|err| %.2e m (limit %.0e), asymmetry %.2e (limit %.0e), "
                  "%d unconverged",
                  separated, touching, worst, kTolerance, worst_sym, kSymmetry, unconverged)};
}

// ---------------------------------------------------------------------------
// Shared fixture: the 3-DoF capsule arm and its 200k-record dataset.

struct Fixture {
  RobotModel robot = load_robot(fixture("robots/arm3.robot.toml"));
  fs::path dir = fs::temp_directory_path() / "kinsdf_acceptance";
  SdfDataset train;
  SdfDataset test;
};

SamplerConfig dataset_config(const RobotModel& robot, std::uint64_t configs, std::uint64_t seed) {
  SamplerConfig cfg = SamplerConfig::defaults_for(robot);
  cfg.configs_count = configs;
  cfg.points_per_config = 200;
  cfg.seed = seed;
  return cfg;
}

Outcome criterion_dataset(Fixture& fx) {
  constexpr double kInsideLo = 0.48, kInsideHi = 0.52;
  constexpr double kRelabelFraction = 0.01;
  fs::remove_all(fx.dir);
  fs::create_directories(fx.dir);
  const SamplerConfig cfg = dataset_config(fx.robot, 1000, 7);
  fx.train = generate_dataset(fx.robot, cfg);
  write_dataset(fx.train, fx.dir / "train_a.ds");
  SamplerConfig again = cfg;
  again.workers = 2;
  write_dataset(generate_dataset(fx.robot, again), fx.dir / "train_b.ds");
  const bool same_hash = hash_file(fx.dir / "train_a.ds") == hash_file(fx.dir / "train_b.ds");

  // Relabel a 1% subsample, one FK per record.
  Rng rng(303);
  const std::size_t n = fx.train.size();
  const std::size_t sub = static_cast<std::size_t>(kRelabelFraction * static_cast<double>(n));
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < sub; ++i) {
    const auto r = static_cast<Eigen::Index>(rng.index(n));
    const Eigen::VectorXd d = signed_distance_vector(fx.robot, fx.train.q.col(r), fx.train.p.col(r));
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (std::memcmp(&d[k], &fx.train.d(k, r), sizeof(double)) != 0) {
        ++mismatched;
        break;
      }
    }
  }
  const double inside = fx.train.inside_fraction();
  fx.test = generate_dataset(fx.robot, dataset_config(fx.robot, 200, 8));
  const bool ok = n == 200000 && inside >= kInsideLo && inside <= kInsideHi && mismatched == 0 && same_hash;
  return {ok, fmt("%zu records, inside fraction %.4f (range [%.2f, %.2f]), %zu/%zu relabeled records differ, "
                  "regeneration hash %s",
                  n, inside, kInsideLo, kInsideHi, mismatched, sub, same_hash ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// Training shared by criteria 4, 5, 6 and 10.

TrainConfig budget() {
  TrainConfig t;
  t.epochs = 100;
  t.batch_size = 256;
  t.learning_rate = 1e-3;
  t.lr_schedule = LrSchedule::cosine;
  t.optimizer = OptimizerKind::adaptive_moment;
  t.patience = 0;
  t.seed = 11;
  return t;
}

struct Trained {
  std::unique_ptr<NeuralField> field;
  RmseReport rmse;
  double overall_rmse = 0.0;  // all (record, link) pairs of the held-out set
  double seconds = 0.0;
};

Trained train_variant(const Fixture& fx, Variant v) {
  const auto t0 = Clock::now();
  ArchConfig arch;
  arch.variant = v;
  TrainResult r = train(fx.train, arch, budget());
  Trained out;
  out.field = std::make_unique<NeuralField>(std::move(r.field));
  out.rmse = eval_rmse(*out.field, fx.test, scaled_close_threshold(fx.robot.reach()));
  out.overall_rmse = rmse_loss(out.field->predict(fx.test.q, fx.test.p), fx.test.d);
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// 4. Gradient exactness

Outcome criterion_gradients(const Fixture& fx, const NeuralField& trained) {
  constexpr int kProbes = 100;
  constexpr double kParamTolerance = 1e-6;
  constexpr double kJacobianTolerance = 1e-3;
  Rng rng(404);

  ArchConfig tiny;
  tiny.m = 3;
  tiny.n = 4;
  tiny.latent_size = 6;
  tiny.encoding_frequencies = 2;
  tiny.backbone_widths = {10};
  tiny.head_residual_width = 5;
  tiny.head_regression_widths = {4};
  double worst_param = 0.0;
  for (Variant v : {Variant::rndf, Variant::multi_head_mlp, Variant::plain_mlp}) {
    tiny.variant = v;
    tiny.plain_widths = {12, 12};
    NeuralField f(tiny);
    f.initialize(405);
    const std::vector<std::size_t> rows = {0, 17, 4242, 90000, 150001, 199999};
    const SdfDataset batch = fx.train.select(rows);
    const Eigen::MatrixXd x = f.stack_inputs(batch.q, batch.p);
    for (int probe = 0; probe < kProbes; ++probe) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.parameter_count()));
      loss_and_gradient(f, x, batch.d, &grad);
      Eigen::VectorXd dir(grad.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
      dir.normalize();
      const double h = 1e-5;
      const Eigen::VectorXd p0 = f.params();
      f.set_params(p0 + h * dir);
      const double up = loss_and_gradient(f, x, batch.d, nullptr);
      f.set_params(p0 - h * dir);
      const double down = loss_and_gradient(f, x, batch.d, nullptr);
      f.set_params(p0);
      const double fd = (up - down) / (2 * h);
      const double an = grad.dot(dir);
      worst_param = std::max(worst_param, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-12}));
    }
  }

  double worst_jac = 0.0;
  for (int probe = 0; probe < kProbes; ++probe) {
    const auto r = static_cast<Eigen::Index>(rng.index(fx.test.size()));
    const Eigen::VectorXd q = fx.test.q.col(r);
    const Eigen::Vector3d p = fx.test.p.col(r);
    const JacobianResult j = trained.input_jacobian(q, p);
    Eigen::MatrixXd an(j.dd_dq.rows(), 6), fd(j.dd_dq.rows(), 6);
    an << j.dd_dq, j.dd_dp;
    const double h = 1e-6;
    for (int c = 0; c < 6; ++c) {
      Eigen::VectorXd qp = q, qm = q;
      Eigen::Vector3d pp = p, pm = p;
      if (c < 3) {
        qp[c] += h;
        qm[c] -= h;
      } else {
        pp[c - 3] += h;
        pm[c - 3] -= h;
      }
      fd.col(c) = (trained.forward(qp, pp) - trained.forward(qm, pm)) / (2 * h);
    }
    worst_jac = std::max(worst_jac, (an - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  const bool ok = worst_param <= kParamTolerance && worst_jac <= kJacobianTolerance;
  return {ok, fmt("parameter directional derivatives: worst rel. error %.2e over %d probes x 3 variants (limit %.0e); "
                  "trained input Jacobian: worst rel. Frobenius error %.2e over %d probes (limit %.0e)",
                  worst_param, kProbes, kParamTolerance, worst_jac, kProbes, kJacobianTolerance)};
}

// ---------------------------------------------------------------------------
// 5. Learning quality

Outcome criterion_learning(const Fixture& fx, const Trained& rndf) {
  constexpr double kCloseFraction = 0.01;  // of reach
  constexpr double kAccuracy = 0.97;
  const double reach = fx.robot.reach();
  const ClassificationReport cls = eval_classification(*rndf.field, fx.test, scaled_band(reach));
  const double close = rndf.rmse.avg_close.value_or(INFINITY);
  const bool ok = close <= kCloseFraction * reach && cls.accuracy >= kAccuracy;
  return {ok, fmt("reach %.3f m; avg close RMSE %.2f mm (limit %.2f mm), far %.2f mm; sign accuracy %.4f in the "
                  "%.1f mm band over %zu pairs (limit %.2f)",
                  reach, close * 1e3, kCloseFraction * reach * 1e3, rndf.rmse.avg_far.value_or(NAN) * 1e3,
                  cls.accuracy, cls.band * 1e3, cls.evaluated, kAccuracy)};
}

// ---------------------------------------------------------------------------
// 6. Ablation ordering

Outcome criterion_ablation(const Trained& rndf, const Trained& multi, const Trained& plain) {
  const double r_rndf = rndf.rmse.accumulation_ratio.value_or(INFINITY);
  const double r_plain = plain.rmse.accumulation_ratio.value_or(-INFINITY);
  const bool order = rndf.overall_rmse < multi.overall_rmse && multi.overall_rmse < plain.overall_rmse;
  const bool ok = order && r_rndf <= r_plain;
  return {ok, fmt("held-out RMSE rndf %.2f < multi-head %.2f < plain %.2f mm: %s; last/first close ratio rndf %.2f "
                  "vs plain %.2f (multi-head %.2f)",
                  rndf.overall_rmse * 1e3, multi.overall_rmse * 1e3, plain.overall_rmse * 1e3, order ? "yes" : "NO",
                  r_rndf, r_plain, multi.rmse.accumulation_ratio.value_or(NAN))};
}

// ---------------------------------------------------------------------------
// 7. Throughput

Outcome criterion_throughput(const NeuralField& field) {
  constexpr std::size_t kLargeBatch = 100000;
  constexpr double kAmortization = 10.0;
  double best_ratio = 0.0;
  std::ostringstream d;
  for (bool f32 : {false, true}) {
    const TimingRow one = bench_throughput(field, 1, 20000, f32, 1);
    const TimingRow big = bench_throughput(field, kLargeBatch, 3, f32, 1);
    const double ratio = one.per_sample_us / big.per_sample_us;
    best_ratio = std::max(best_ratio, ratio);
    d << (f32 ? "f32" : "f64") << ": batch 1 " << fmt("%.2f", one.per_sample_us) << " us, batch 100k "
      << fmt("%.2f", big.per_sample_us) << " us/sample (" << fmt("%.1f", ratio) << "x); ";
  }
  const TimingRow gjk = bench_gjk(20000, field.link_count(), 1);
  d << "GJK " << fmt("%.2f", gjk.per_sample_us) << " us/query; required amortization " << kAmortization << "x";
  return {best_ratio >= kAmortization, d.str()};
}

// ---------------------------------------------------------------------------
// 8. Objective/constraint algebra

std::shared_ptr<const DistanceField> small_net(const RobotModel& model, std::uint64_t seed) {
  ArchConfig a;
  a.m = static_cast<int>(model.dof());
  a.n = static_cast<int>(model.link_count());
  a.latent_size = 8;
  a.encoding_frequencies = 2;
  a.backbone_widths = {12};
  a.head_residual_width = 6;
  a.head_regression_widths = {5};
  auto f = std::make_shared<NeuralField>(a);
  f->initialize(seed);
  // Centimeter-scale outputs, so the fixture's margins are active.
  Eigen::VectorXd p = f->params();
  for (const LayerShape& s : f->layers()) {
    if (s.name.ends_with("output")) {
      p.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.out) * (s.in + 1)) *= 0.05;
    }
  }
  f->set_params(p);
  return f;
}

Outcome criterion_algebra() {
  constexpr int kFixtures = 1000;
  constexpr double kGradientTolerance = 1e-3;
  Rng rng(808);

  // Q >= 0 and Q = 0 exactly when every contact distance is in [-d_p, 0].
  int algebra_bad = 0, zero_cases = 0;
  GraspProblem prob;
  for (int t = 0; t < kFixtures; ++t) {
    const int n = 1 + static_cast<int>(rng.index(5));
    prob.d_p = rng.uniform(0.0005, 0.005);
    prob.lambda1 = rng.uniform(0.1, 3.0);
    prob.lambda2 = rng.uniform(0.1, 3.0);
    prob.sum_contacts = t % 2 == 1;
    Eigen::VectorXd d(n);
    for (int k = 0; k < n; ++k) {
      switch (rng.index(4)) {
        case 0: d[k] = rng.uniform(-prob.d_p, 0.0); break;
        case 1: d[k] = rng.index(2) ? 0.0 : -prob.d_p; break;
        default: d[k] = rng.uniform(-3 * prob.d_p, 2 * prob.d_p);
      }
    }
    const bool inside = ((d.array() <= 0.0) && (d.array() >= -prob.d_p)).all();
    const double q = contact_objective(d, prob);
    zero_cases += inside ? 1 : 0;
    if (q < 0.0 || (q == 0.0) != inside) ++algebra_bad;
  }

  // Soft-min gap.
  int gap_bad = 0;
  for (int t = 0; t < kFixtures; ++t) {
    const int n = 1 + static_cast<int>(rng.index(200));
    const double tau = std::pow(10.0, rng.uniform(-5.0, -1.0));
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-0.1, 0.1);
    if (t % 3 == 0) v.setConstant(v[0]);  // ties attain the bound
    const double s = soft_min(v, tau);
    const double gap = v.minCoeff() - s;
    if (gap < -1e-15 || gap > tau * std::log(static_cast<double>(n)) * (1 + 1e-12) + 1e-15) ++gap_bad;
  }

  // Augmented-Lagrangian gradient on a pinch system with small networks.
  const CompositeSystem base = load_system(fixture("problems/pinch.system.toml"));
  const auto finger = base.hand()[0].model;
  const auto wrist = base.arm().model;
  const CompositeSystem sys({"wrist", wrist, small_net(*wrist, 7), Pose::identity()}, base.mount_link(),
                            base.mount_offset(),
                            {{"finger_a", finger, small_net(*finger, 8), base.hand()[0].base},
                             {"finger_b", finger, small_net(*finger, 9), base.hand()[1].base}});
  GraspProblem pinch = load_problem(fixture("problems/pinch.problem.toml"), sys);
  pinch.field_margin = 0.002;
  double worst = 0.0;
  int entries = 0;
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd q(static_cast<Eigen::Index>(sys.dof()));
    for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = rng.uniform(sys.lower_limits()[i], sys.upper_limits()[i]);
    const double tau = t % 2 ? 1e-3 : 5e-3;
    const SmoothTerms st = smooth_terms(sys, pinch, q, tau, false);
    Multipliers mult{2.0, 3.0, 50.0};
    mult.obs = std::max(mult.obs, mult.rho * (st.c_obs + 0.01));
    mult.free = std::max(mult.free, mult.rho * (st.c_free + 0.01));
    Eigen::VectorXd g;
    augmented_lagrangian(sys, pinch, q, tau, mult, &g);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const double h = 1e-6;
      Eigen::VectorXd qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const double fd =
          (augmented_lagrangian(sys, pinch, qp, tau, mult, nullptr) - augmented_lagrangian(sys, pinch, qm, tau, mult, nullptr)) /
          (2 * h);
      worst = std::max(worst, std::abs(g[i] - fd) / std::max(1e-3, std::abs(fd)));
      ++entries;
    }
  }
  const bool ok = algebra_bad == 0 && gap_bad == 0 && worst <= kGradientTolerance;
  return {ok, fmt("Q sign/zero violations %d of %d (%d zero cases); soft-min gap violations %d of %d; constrained "
                  "objective gradient worst rel. error %.2e over %d entries (limit %.0e)",
                  algebra_bad, kFixtures, zero_cases, gap_bad, kFixtures, worst, entries, kGradientTolerance)};
}

// ---------------------------------------------------------------------------
// 9. Planner end to end

Outcome criterion_planner() {
  constexpr int kRestarts = 20;
  constexpr double kConvergedFraction = 0.70;
  constexpr double kTol = 1e-4;
  const CompositeSystem sys = load_system(fixture("problems/pinch.system.toml"));
  const GraspProblem prob = load_problem(fixture("problems/pinch.problem.toml"), sys);
  PlannerOptions opt;
  const RestartResult rr = plan_with_restarts(sys, prob, kRestarts, 42, opt);

  int converged = 0, certified = 0;
  for (const GraspSolution& s : rr.solutions) {
    if (s.status != GraspStatus::converged) continue;
    ++converged;
    // Recompute everything from q through the exact oracles.
    const Eigen::MatrixXd obj = sys.query_exact(s.q, prob.object_points);
    const Eigen::MatrixXd obs = sys.query_exact(s.q, prob.obstacle_points);
    bool ok = obs.minCoeff() >= prob.d_min_obs - kTol;
    for (std::size_t k : prob.free_links(sys.link_count())) {
      ok = ok && obj.col(static_cast<Eigen::Index>(k)).minCoeff() >= -kTol;
    }
    for (std::size_t k : prob.contact_links) ok = ok && obj.col(static_cast<Eigen::Index>(k)).minCoeff() >= -prob.d_p - kTol;
    certified += ok ? 1 : 0;
  }

  const double r = 0.03;
  const std::vector<ContactPoint> antipodal = {{{0, r, 0}, {0, -1, 0}}, {{0, -r, 0}, {0, 1, 0}}};
  const bool fc = force_closure(antipodal, 0.5, 8, Eigen::Vector3d::Zero(), r).closure;
  const double frac = static_cast<double>(converged) / kRestarts;
  const bool ok = frac >= kConvergedFraction && certified == converged && fc;
  return {ok, fmt("%d/%d restarts converged (limit %.0f%%); %d/%d converged solutions pass the exact recheck "
                  "(tolerance %.0e m); antipodal reference force closure %s",
                  converged, kRestarts, kConvergedFraction * 100, certified, converged, kTol, fc ? "true" : "FALSE")};
}

// ---------------------------------------------------------------------------
// 10. Isosurface sanity

Outcome criterion_isosurface(const Fixture& fx, const Trained& rndf) {
  constexpr int kConfigs = 3;
  constexpr int kResolution = 144;
  constexpr double kHausdorffFactor = 3.0;
  constexpr int kSurfaceSamples = 20000;
  const double close_rmse = rndf.rmse.avg_close.value_or(INFINITY);
  Rng rng(1010);
  double worst_h = 0.0;
  int not_enclosed = 0;
  std::size_t faces = 0;
  bool closed = true;
  // Points the field was trained on: offset -+ 1/scale per axis.
  const ArchConfig& arch = rndf.field->arch();
  const int m = arch.m;
  const Eigen::Vector3d domain_lo = arch.input_offset.tail<3>() - arch.input_scale.tail<3>().cwiseInverse();
  const Eigen::Vector3d domain_hi = arch.input_offset.tail<3>() + arch.input_scale.tail<3>().cwiseInverse();
  int rejected = 0;
  for (int c = 0; c < kConfigs;) {
    Eigen::VectorXd q(m);
    for (int i = 0; i < m; ++i) q[i] = rng.uniform(fx.robot.lower_limits()[i], fx.robot.upper_limits()[i]);
    const std::vector<Pose> poses = forward_kinematics(fx.robot, q);

    // True union surface: link samples not inside any other link.
    std::vector<Eigen::Vector3d> truth;
    Eigen::AlignedBox3d box;
    while (static_cast<int>(truth.size()) < kSurfaceSamples) {
      const std::size_t k = rng.index(fx.robot.link_count());
      const LinkSpec& link = fx.robot.links()[k];
      const Eigen::Vector3d p = (poses[k] * link.origin).apply(sample_surface(link.geometry, rng).point);
      if (signed_distance_vector(fx.robot, poses, p).minCoeff() < -1e-9) continue;
      truth.push_back(p);
      box.extend(p);
    }
    box.min().array() -= 0.15;
    box.max().array() += 0.15;
    // The grid must stay where the field has data; outside it extrapolates.
    if ((box.min() - domain_lo).minCoeff() < 0.0 || (domain_hi - box.max()).minCoeff() < 0.0) {
      if (++rejected > 1000) return {false, "no configuration fits the field's training range"};
      continue;
    }
    ++c;

    const int n = kResolution;
    Eigen::Matrix3Xd grid(3, n * n * n);
    const Eigen::Vector3d step = box.sizes() / (n - 1);
    for (int z = 0, i = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x, ++i) grid.col(i) = box.min() + step.cwiseProduct(Eigen::Vector3d(x, y, z));
      }
    }
    const Eigen::VectorXd g = rndf.field->predict(q.replicate(1, grid.cols()), grid).colwise().minCoeff().transpose();
    const std::vector<double> values(g.data(), g.data() + g.size());
    const IsosurfaceResult near = extract_isosurface_grid(values, box, n, 0.001);
    const IsosurfaceResult far = extract_isosurface_grid(values, box, n, 0.1);
    faces += near.mesh.faces.size();
    if (near.mesh.empty() || far.mesh.empty()) return {false, "empty isosurface"};

    // Mesh -> truth: exact distance of every vertex to the union surface.
    double h = 0.0;
    for (const auto& v : near.mesh.vertices) h = std::max(h, std::abs(signed_distance_vector(fx.robot, poses, v).minCoeff()));
    // Truth -> mesh.
    const MeshDistance near_md(near.mesh);
    for (const auto& p : truth) h = std::max(h, near_md.unsigned_distance(p));
    worst_h = std::max(worst_h, h);

    try {
      validate_closed_mesh(far.mesh);
    } catch (const Error&) {
      closed = false;
    }
    const MeshDistance far_md(far.mesh);
    for (const auto& v : near.mesh.vertices) {
      if (!far_md.inside(v) || far_md.unsigned_distance(v) <= 0.0) ++not_enclosed;
    }
  }
  const bool ok = worst_h <= kHausdorffFactor * close_rmse && not_enclosed == 0 && closed;
  return {ok, fmt("%d configurations, %zu triangles at level 0.001; worst Hausdorff %.2f mm vs limit %.0f x %.2f mm "
                  "= %.2f mm; level-0.1 mesh closed: %s; level-0.001 vertices outside it: %d; %d configurations outside "
                  "the training range skipped",
                  kConfigs, faces, worst_h * 1e3, kHausdorffFactor, close_rmse * 1e3,
                  kHausdorffFactor * close_rmse * 1e3, closed ? "yes" : "NO", not_enclosed, rejected)};
}

std::vector<bool> selected(11, true);

// `extra_seconds` adds work done earlier on the criterion's behalf.
template <class F>
void run(int id, const std::string& title, double limit, F&& body, const double* extra_seconds = nullptr) {
  if (!selected[static_cast<std::size_t>(id)]) return;
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, title, o, seconds_since(t0) + (extra_seconds ? *extra_seconds : 0.0), limit);
}

}  // namespace

// Arguments, when given, restrict the run to those criterion numbers.
int main(int argc, char** argv) {
  if (argc > 1) {
    std::fill(selected.begin(), selected.end(), false);
    for (int i = 1; i < argc; ++i) {
      const int id = std::atoi(argv[i]);
      if (id < 1 || id > 10) {
        std::fprintf(stderr, "usage: acceptance [criterion 1-10 ...]\n");
        return 2;
      }
      selected[static_cast<std::size_t>(id)] = true;
    }
  }
  const bool need_training = selected[4] || selected[5] || selected[6] || selected[7] || selected[10];
  if (need_training) selected[3] = true;

  std::printf("kinsdf acceptance run\n");
  std::fflush(stdout);
  Fixture fx;
  run(1, "oracle exactness", 120, criterion_oracle);
  run(2, "GJK correctness", 60, criterion_gjk);
  run(3, "dataset properties", 300, [&] { return criterion_dataset(fx); });

  Trained rndf, multi, plain;
  std::string train_error;
  if (need_training) {
    try {
      if (fx.train.size() == 0) throw std::runtime_error("the dataset criterion did not produce the training set");
      rndf = train_variant(fx, Variant::rndf);
    } catch (const std::exception& e) {
      train_error = e.what();
    }
  }
  auto need_rndf = [&] {
    if (!rndf.field) throw std::runtime_error("rndf training failed: " + train_error);
  };

  run(4, "gradient exactness", 60, [&] {
    need_rndf();
    return criterion_gradients(fx, *rndf.field);
  });
  // The rndf training time counts toward 5 and 6.
  run(5, "learning quality", 1800, [&] {
    need_rndf();
    return criterion_learning(fx, rndf);
  }, &rndf.seconds);
  run(6, "ablation ordering", 5400, [&] {
    need_rndf();
    multi = train_variant(fx, Variant::multi_head_mlp);
    plain = train_variant(fx, Variant::plain_mlp);
    return criterion_ablation(rndf, multi, plain);
  }, &rndf.seconds);
  run(7, "throughput contract", 300, [&] {
    need_rndf();
    return criterion_throughput(*rndf.field);
  });
  run(8, "objective/constraint algebra", 120, criterion_algebra);
  run(9, "planner end to end", 1200, criterion_planner);
  run(10, "isosurface sanity", 300, [&] {
    need_rndf();
    return criterion_isosurface(fx, rndf);
  });

  int ran = 0;
  for (int i = 1; i <= 10; ++i) ran += selected[static_cast<std::size_t>(i)] ? 1 : 0;
  std::printf("%d of %d criteria failed\n", failures, ran);
  fs::remove_all(fx.dir);
  return failures == 0 ? 0 : 1;
}
