#include "kinsdf/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "kinsdf/errors.hpp"

namespace kinsdf {

SamplerConfig SamplerConfig::defaults_for(const RobotModel& model) {
  SamplerConfig c;
  const double r = model.reach();
  c.d_s = 0.05 * r;
  const Eigen::Vector3d center = model.base().translation;
  const Eigen::Vector3d half = Eigen::Vector3d::Constant(1.05 * r);
  c.workspace = Eigen::AlignedBox3d(center - half, center + half);
  return c;
}

void SamplerConfig::validate(const RobotModel& model) const {
  if (configs_count == 0 || points_per_config == 0) throw InvalidArgument("configs_count and points_per_config must be positive");
  if (!(d_s > 0.0)) throw InvalidArgument("near-surface band d_s must be positive");
  const auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(near_surface_fraction) || !in_unit(inside_fraction)) throw InvalidArgument("fractions must lie in [0, 1]");
  if (!(limit_expansion >= 0.0)) throw InvalidArgument("limit_expansion must be nonnegative");
  const Eigen::Vector3d c = model.base().translation;
  const Eigen::Vector3d r = Eigen::Vector3d::Constant(model.reach());
  if (workspace.isEmpty() || !workspace.contains(Eigen::AlignedBox3d(c - r, c + r))) {
    throw InvalidArgument("workspace box must contain the robot's reachable sphere");
  }
}

double SdfDataset::inside_fraction() const {
  if (tags.empty()) return 0.0;
  const auto inside = std::count_if(tags.begin(), tags.end(), [](std::uint8_t t) { return (t & kTagInside) != 0; });
  return static_cast<double>(inside) / static_cast<double>(tags.size());
}

SdfDataset SdfDataset::select(const std::vector<std::size_t>& indices) const {
  SdfDataset out;
  out.meta = meta;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.q.resize(q.rows(), n);
  out.p.resize(3, n);
  out.d.resize(d.rows(), n);
  out.config_index.reserve(indices.size());
  out.tags.reserve(indices.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(i)]);
    out.q.col(i) = q.col(src);
    out.p.col(i) = p.col(src);
    out.d.col(i) = d.col(src);
    out.config_index.push_back(config_index[static_cast<std::size_t>(src)]);
    out.tags.push_back(tags[static_cast<std::size_t>(src)]);
  }
  return out;
}

Eigen::VectorXd sample_configuration(const RobotModel& model, double expansion, Rng& rng) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(model.dof()));
  for (std::size_t i = 0; i < model.dof(); ++i) {
    const auto& j = model.joints()[i];
    const double e = expansion * (j.upper - j.lower);
    q[static_cast<Eigen::Index>(i)] = rng.uniform(j.lower - e, j.upper + e);
  }
  return q;
}

namespace {

// Area-weighted link surface sampler for one configuration.
class SurfaceSampler {
 public:
  SurfaceSampler(const RobotModel& model, std::vector<Pose> poses) : model_(model), poses_(std::move(poses)) {
    double acc = 0.0;
    for (const auto& link : model.links()) {
      acc += geometry_area(link.geometry);
      cumulative_.push_back(acc);
    }
    rejections_.assign(model.link_count(), 0);
  }

  // offset_lo/offset_hi bound the normal offset; `accept` sees min_k d_k.
  template <class Accept>
  bool try_sample(double offset_lo, double offset_hi, Rng& rng, Accept accept, Eigen::Vector3d& out,
                  Eigen::VectorXd& d) {
    const double u = rng.uniform() * cumulative_.back();
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                                             cumulative_.begin());
    k = std::min(k, cumulative_.size() - 1);
    const LinkSpec& link = model_.links()[k];
    const SurfaceSample s = sample_surface(link.geometry, rng);
    const Pose frame = poses_[k] * link.origin;
    const Eigen::Vector3d x = frame.apply(s.point);
    const Eigen::Vector3d n = frame.rotation * s.normal;
    const Eigen::Vector3d p = x + rng.uniform(offset_lo, offset_hi) * n;
    d = signed_distance_vector(model_, poses_, p);
    if (!accept(d.minCoeff())) {
      ++rejections_[k];
      return false;
    }
    out = p;
    return true;
  }

  std::string worst_geometry() const {
    const auto k = static_cast<std::size_t>(std::max_element(rejections_.begin(), rejections_.end()) - rejections_.begin());
    const auto& link = model_.links()[k];
    return "link '" + link.name + "' (" + geometry_kind(link.geometry) + ")";
  }

  const std::vector<Pose>& poses() const { return poses_; }

 private:
  const RobotModel& model_;
  std::vector<Pose> poses_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> rejections_;
};

}  // namespace

std::vector<Eigen::Vector3d> sample_near_surface(const RobotModel& model, const Eigen::VectorXd& q, double d_s,
                                                 std::size_t count, Rng& rng) {
  if (!(d_s > 0.0)) throw InvalidArgument("near-surface band d_s must be positive");
  SurfaceSampler sampler(model, forward_kinematics(model, q));
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  const std::size_t budget = 100 * std::max<std::size_t>(count, 1);
  Eigen::Vector3d p;
  Eigen::VectorXd d;
  for (std::size_t attempt = 0; out.size() < count; ++attempt) {
    if (attempt >= budget) {
      throw SamplingError("near-surface sampling exhausted its rejection budget; most rejections on " +
                          sampler.worst_geometry());
    }
    if (sampler.try_sample(-d_s, d_s, rng, [&](double m) { return std::abs(m) <= d_s; }, p, d)) out.push_back(p);
  }
  return out;
}

namespace {

void generate_config(const RobotModel& model, const SamplerConfig& cfg, std::uint64_t c, SdfDataset& ds) {
  Rng rng = Rng::derive(cfg.seed, c);
  const Eigen::VectorXd q = sample_configuration(model, cfg.limit_expansion, rng);
  SurfaceSampler sampler(model, forward_kinematics(model, q));

  const auto total = static_cast<std::int64_t>(cfg.points_per_config);
  const auto n_near = static_cast<std::int64_t>(std::llround(cfg.near_surface_fraction * static_cast<double>(total)));
  const auto inside_target = static_cast<std::int64_t>(std::llround(cfg.inside_fraction * static_cast<double>(total)));
  std::int64_t n_volume = total - n_near;

  struct Point {
    Eigen::Vector3d p;
    Eigen::VectorXd d;
    std::uint8_t tag;
  };
  std::vector<Point> points;
  points.reserve(static_cast<std::size_t>(total));

  const Eigen::Vector3d lo = cfg.workspace.min();
  const Eigen::Vector3d hi = cfg.workspace.max();
  const auto uniform_point = [&] {
    return Eigen::Vector3d(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
  };

  std::int64_t volume_inside = 0;
  for (std::int64_t i = 0; i < n_volume; ++i) {
    Point pt{uniform_point(), {}, 0};
    pt.d = signed_distance_vector(model, sampler.poses(), pt.p);
    if (pt.d.minCoeff() < 0.0) {
      pt.tag |= kTagInside;
      ++volume_inside;
    }
    points.push_back(std::move(pt));
  }

  // Rebalance: too many inside volume points are redrawn; the inside
  // deficit is filled from the near-surface budget, borrowing outside
  // volume slots if the budget is too small.
  const std::size_t retry_budget = 100 * static_cast<std::size_t>(total);
  std::size_t retries = 0;
  for (auto& pt : points) {
    while (volume_inside > inside_target && (pt.tag & kTagInside)) {
      if (++retries > retry_budget) throw SamplingError("dataset rebalancing failed: workspace volume mostly inside the robot");
      pt.p = uniform_point();
      pt.d = signed_distance_vector(model, sampler.poses(), pt.p);
      if (pt.d.minCoeff() >= 0.0) {
        pt.tag = 0;
        --volume_inside;
      }
    }
  }
  std::int64_t near_inside = inside_target - volume_inside;
  std::int64_t near_outside = n_near - near_inside;
  if (near_outside < 0) {
    for (std::int64_t drop = -near_outside; drop > 0;) {
      auto it = std::find_if(points.rbegin(), points.rend(), [](const Point& pt) { return !(pt.tag & kTagInside); });
      points.erase(std::next(it).base());
      --drop;
    }
    near_outside = 0;
  }

  const double band = cfg.d_s;
  const auto fill = [&](std::int64_t count, bool inside) {
    const std::size_t budget = 100 * static_cast<std::size_t>(std::max<std::int64_t>(count, 1));
    std::size_t attempts = 0;
    Eigen::Vector3d p;
    Eigen::VectorXd d;
    const auto accept = [&](double m) { return std::abs(m) <= band && (m < 0.0) == inside; };
    for (std::int64_t made = 0; made < count;) {
      if (attempts++ >= budget) {
        throw SamplingError(std::string("near-surface ") + (inside ? "inside" : "outside") +
                            " sampling exhausted its rejection budget; most rejections on " + sampler.worst_geometry());
      }
      const bool ok = inside ? sampler.try_sample(-band, 0.0, rng, accept, p, d) : sampler.try_sample(0.0, band, rng, accept, p, d);
      if (!ok) continue;
      points.push_back({p, d, static_cast<std::uint8_t>(kTagNearSurface | (inside ? kTagInside : 0))});
      ++made;
    }
  };
  fill(near_inside, true);
  fill(near_outside, false);

  const auto base = static_cast<Eigen::Index>(c * cfg.points_per_config);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Index col = base + static_cast<Eigen::Index>(i);
    ds.q.col(col) = q;
    ds.p.col(col) = points[i].p;
    ds.d.col(col) = points[i].d;
    ds.config_index[static_cast<std::size_t>(col)] = static_cast<std::uint32_t>(c);
    ds.tags[static_cast<std::size_t>(col)] = points[i].tag;
  }
}

}  // namespace

SdfDataset generate_dataset(const RobotModel& model, const SamplerConfig& config) {
  config.validate(model);
  SdfDataset ds;
  ds.meta.robot_name = model.name();
  ds.meta.robot_hash = model.hash();
  ds.meta.dof = static_cast<std::uint32_t>(model.dof());
  ds.meta.links = static_cast<std::uint32_t>(model.link_count());
  ds.meta.config = config;
  ds.meta.oracle = oracle_kind(model);

  const auto total = static_cast<Eigen::Index>(config.configs_count * config.points_per_config);
  ds.q.resize(static_cast<Eigen::Index>(model.dof()), total);
  ds.p.resize(3, total);
  ds.d.resize(static_cast<Eigen::Index>(model.link_count()), total);
  ds.config_index.assign(static_cast<std::size_t>(total), 0);
  ds.tags.assign(static_cast<std::size_t>(total), 0);

  // Each configuration has its own random stream and output slot, so the
  // partition across workers cannot change the result.
  const unsigned workers = std::max(1u, config.workers);
  if (workers == 1) {
    for (std::uint64_t c = 0; c < config.configs_count; ++c) generate_config(model, config, c, ds);
    return ds;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::uint64_t c = w; c < config.configs_count; c += workers) generate_config(model, config, c, ds);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return ds;
}

}  // namespace kinsdf
