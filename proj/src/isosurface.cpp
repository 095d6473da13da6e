#include <array>
#include <cmath>
#include <unordered_map>

#include "kinsdf/errors.hpp"
#include "kinsdf/evaluator.hpp"

namespace kinsdf {

namespace {

// Cube corners as (dx, dy, dz) bit patterns, and six tetrahedra sharing the
// 0-6 diagonal. Adjacent cubes split their common face along the same
// diagonal, so the tetrahedral mesh is conforming.
constexpr std::array<std::array<int, 3>, 8> kCorner{{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                                     {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};
constexpr std::array<std::array<int, 4>, 6> kTets{{{0, 5, 1, 6}, {0, 1, 2, 6}, {0, 2, 3, 6},
                                                   {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}}};

class Builder {
 public:
  Builder(const std::vector<double>& values, const Eigen::AlignedBox3d& box, int res, double level)
      : values_(values), box_(box), res_(res), level_(level), step_((box.max() - box.min()) / (res - 1)) {}

  Eigen::Vector3d position(std::int64_t id) const {
    const std::int64_t r = res_;
    return box_.min() + Eigen::Vector3d(static_cast<double>(id % r), static_cast<double>((id / r) % r),
                                        static_cast<double>(id / (r * r)))
                            .cwiseProduct(step_);
  }

  int edge_vertex(std::int64_t a, std::int64_t b) {
    if (a > b) std::swap(a, b);
    const std::uint64_t key = static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(total()) + static_cast<std::uint64_t>(b);
    auto [it, inserted] = welded_.try_emplace(key, static_cast<int>(mesh_.vertices.size()));
    if (inserted) {
      const double va = values_[static_cast<std::size_t>(a)];
      const double vb = values_[static_cast<std::size_t>(b)];
      const double t = std::clamp((level_ - va) / (vb - va), 0.0, 1.0);
      mesh_.vertices.push_back(position(a) + t * (position(b) - position(a)));
    }
    return it->second;
  }

  // Emits the triangle with the winding whose normal points from the inside
  // region toward the outside region.
  void emit(int i, int j, int k, const Eigen::Vector3d& toward_outside) {
    const Eigen::Vector3d& a = mesh_.vertices[static_cast<std::size_t>(i)];
    const Eigen::Vector3d& b = mesh_.vertices[static_cast<std::size_t>(j)];
    const Eigen::Vector3d& c = mesh_.vertices[static_cast<std::size_t>(k)];
    if (i == j || j == k || i == k) return;
    if ((b - a).cross(c - a).dot(toward_outside) >= 0.0) {
      mesh_.faces.push_back({i, j, k});
    } else {
      mesh_.faces.push_back({i, k, j});
    }
  }

  void tetrahedron(const std::array<std::int64_t, 4>& v) {
    std::array<std::int64_t, 4> in{};
    std::array<std::int64_t, 4> out{};
    int ni = 0;
    int no = 0;
    for (std::int64_t id : v) {
      if (values_[static_cast<std::size_t>(id)] < level_) {
        in[static_cast<std::size_t>(ni++)] = id;
      } else {
        out[static_cast<std::size_t>(no++)] = id;
      }
    }
    if (ni == 0 || no == 0) return;
    Eigen::Vector3d ci = Eigen::Vector3d::Zero();
    Eigen::Vector3d co = Eigen::Vector3d::Zero();
    for (int i = 0; i < ni; ++i) ci += position(in[static_cast<std::size_t>(i)]) / ni;
    for (int i = 0; i < no; ++i) co += position(out[static_cast<std::size_t>(i)]) / no;
    const Eigen::Vector3d dir = co - ci;
    if (ni == 1) {
      emit(edge_vertex(in[0], out[0]), edge_vertex(in[0], out[1]), edge_vertex(in[0], out[2]), dir);
    } else if (ni == 3) {
      emit(edge_vertex(out[0], in[0]), edge_vertex(out[0], in[1]), edge_vertex(out[0], in[2]), dir);
    } else {
      const int a = edge_vertex(in[0], out[0]);
      const int b = edge_vertex(in[0], out[1]);
      const int c = edge_vertex(in[1], out[1]);
      const int d = edge_vertex(in[1], out[0]);
      emit(a, b, c, dir);
      emit(a, c, d, dir);
    }
  }

  TriangleMesh run() {
    const std::int64_t r = res_;
    for (std::int64_t z = 0; z + 1 < r; ++z) {
      for (std::int64_t y = 0; y + 1 < r; ++y) {
        for (std::int64_t x = 0; x + 1 < r; ++x) {
          std::array<std::int64_t, 8> ids{};
          for (std::size_t c = 0; c < 8; ++c) {
            ids[c] = (x + kCorner[c][0]) + r * ((y + kCorner[c][1]) + r * (z + kCorner[c][2]));
          }
          for (const auto& t : kTets) tetrahedron({ids[static_cast<std::size_t>(t[0])], ids[static_cast<std::size_t>(t[1])],
                                                   ids[static_cast<std::size_t>(t[2])], ids[static_cast<std::size_t>(t[3])]});
        }
      }
    }
    return std::move(mesh_);
  }

  double spacing() const { return step_.maxCoeff(); }

 private:
  std::int64_t total() const { return static_cast<std::int64_t>(res_) * res_ * res_; }

  const std::vector<double>& values_;
  Eigen::AlignedBox3d box_;
  int res_;
  double level_;
  Eigen::Vector3d step_;
  TriangleMesh mesh_;
  std::unordered_map<std::uint64_t, int> welded_;
};

}  // namespace

IsosurfaceResult extract_isosurface_grid(const std::vector<double>& values, const Eigen::AlignedBox3d& box,
                                         int resolution, double level) {
  if (resolution < 2) throw InvalidArgument("grid resolution must be at least 2");
  if (box.isEmpty() || (box.sizes().array() <= 0.0).any()) throw InvalidArgument("isosurface box must have positive extent");
  const auto r = static_cast<std::size_t>(resolution);
  if (values.size() != r * r * r) throw DimensionMismatch("grid value count does not match the resolution");
  if (!std::isfinite(level)) throw InvalidArgument("isosurface level must be finite");
  Builder b(values, box, resolution, level);
  IsosurfaceResult res;
  res.spacing = b.spacing();
  res.mesh = b.run();
  if (res.mesh.empty()) res.warning = "level lies outside the sampled field range; mesh is empty";
  return res;
}

IsosurfaceResult extract_isosurface(const DistanceField& field, const Eigen::VectorXd& q, double level,
                                    const Eigen::AlignedBox3d& box, int resolution) {
  if (resolution < 2) throw InvalidArgument("grid resolution must be at least 2");
  if (static_cast<std::size_t>(q.size()) != field.dof()) throw DimensionMismatch("configuration has wrong length");
  const std::int64_t r = resolution;
  const std::int64_t total = r * r * r;
  std::vector<double> values(static_cast<std::size_t>(total));
  const Eigen::Vector3d step = (box.max() - box.min()) / (resolution - 1);
  constexpr std::int64_t kChunk = 16384;
  for (std::int64_t begin = 0; begin < total; begin += kChunk) {
    const std::int64_t len = std::min(kChunk, total - begin);
    Eigen::Matrix3Xd p(3, len);
    for (std::int64_t i = 0; i < len; ++i) {
      const std::int64_t id = begin + i;
      p.col(i) = box.min() + Eigen::Vector3d(static_cast<double>(id % r), static_cast<double>((id / r) % r),
                                             static_cast<double>(id / (r * r)))
                                 .cwiseProduct(step);
    }
    const Eigen::MatrixXd d = field.predict(q.replicate(1, len), p);
    for (std::int64_t i = 0; i < len; ++i) values[static_cast<std::size_t>(begin + i)] = d.col(i).minCoeff();
  }
  return extract_isosurface_grid(values, box, resolution, level);
}

}  // namespace kinsdf
