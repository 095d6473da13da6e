#include <bit>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "kinsdf/errors.hpp"
#include "kinsdf/sampler.hpp"

namespace kinsdf {

namespace {

constexpr char kDatasetMagic[8] = {'K', 'S', 'D', 'F', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace

void write_dataset(const SdfDataset& ds, const std::filesystem::path& path) {
  BinaryWriter w;
  w.bytes(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(ds.meta.dof);
  w.u32(ds.meta.links);
  w.u64(ds.size());
  w.u64(ds.meta.robot_hash);
  w.u32(static_cast<std::uint32_t>(ds.meta.oracle));
  w.str(ds.meta.robot_name);
  const SamplerConfig& c = ds.meta.config;
  w.u64(c.configs_count);
  w.u64(c.points_per_config);
  w.f64(c.d_s);
  w.f64(c.near_surface_fraction);
  w.f64(c.inside_fraction);
  w.f64(c.limit_expansion);
  for (int i = 0; i < 3; ++i) w.f64(c.workspace.min()[i]);
  for (int i = 0; i < 3; ++i) w.f64(c.workspace.max()[i]);
  w.u64(c.seed);

  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    w.u32(ds.config_index[r]);
    w.u32(ds.tags[r]);
    for (Eigen::Index i = 0; i < ds.q.rows(); ++i) w.f64(ds.q(i, col));
    for (Eigen::Index i = 0; i < 3; ++i) w.f64(ds.p(i, col));
    for (Eigen::Index i = 0; i < ds.d.rows(); ++i) w.f64(ds.d(i, col));
  }
  w.save(path);
}

SdfDataset read_dataset(const std::filesystem::path& path) {
  BinaryReader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kDatasetMagic, sizeof magic) != 0) throw ParseError(path.string() + ": not a dataset file");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) throw ParseError(path.string() + ": unsupported dataset version " + std::to_string(version));

  SdfDataset ds;
  ds.meta.dof = r.u32();
  ds.meta.links = r.u32();
  const std::uint64_t count = r.u64();
  ds.meta.robot_hash = r.u64();
  ds.meta.oracle = static_cast<OracleKind>(r.u32());
  ds.meta.robot_name = r.str();
  SamplerConfig& c = ds.meta.config;
  c.configs_count = r.u64();
  c.points_per_config = r.u64();
  c.d_s = r.f64();
  c.near_surface_fraction = r.f64();
  c.inside_fraction = r.f64();
  c.limit_expansion = r.f64();
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
  for (int i = 0; i < 3; ++i) lo[i] = r.f64();
  for (int i = 0; i < 3; ++i) hi[i] = r.f64();
  c.workspace = Eigen::AlignedBox3d(lo, hi);
  c.seed = r.u64();

  const std::size_t record_bytes = 8 + 8 * (ds.meta.dof + 3 + ds.meta.links);
  if (r.remaining() != count * record_bytes) throw ParseError(path.string() + ": truncated or oversized record block");
  const auto n = static_cast<Eigen::Index>(count);
  ds.q.resize(ds.meta.dof, n);
  ds.p.resize(3, n);
  ds.d.resize(ds.meta.links, n);
  ds.config_index.resize(count);
  ds.tags.resize(count);
  for (Eigen::Index col = 0; col < n; ++col) {
    ds.config_index[static_cast<std::size_t>(col)] = r.u32();
    ds.tags[static_cast<std::size_t>(col)] = static_cast<std::uint8_t>(r.u32());
    for (Eigen::Index i = 0; i < ds.q.rows(); ++i) ds.q(i, col) = r.f64();
    for (Eigen::Index i = 0; i < 3; ++i) ds.p(i, col) = r.f64();
    for (Eigen::Index i = 0; i < ds.d.rows(); ++i) ds.d(i, col) = r.f64();
  }
  return ds;
}

void export_dataset_csv(const SdfDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "config,near_surface,inside";
  for (Eigen::Index i = 0; i < ds.q.rows(); ++i) out << ",q" << i;
  out << ",px,py,pz";
  for (Eigen::Index i = 0; i < ds.d.rows(); ++i) out << ",d" << i;
  out << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    out << ds.config_index[r] << ',' << ((ds.tags[r] & kTagNearSurface) ? 1 : 0) << ','
        << ((ds.tags[r] & kTagInside) ? 1 : 0);
    for (Eigen::Index i = 0; i < ds.q.rows(); ++i) out << ',' << ds.q(i, col);
    for (Eigen::Index i = 0; i < 3; ++i) out << ',' << ds.p(i, col);
    for (Eigen::Index i = 0; i < ds.d.rows(); ++i) out << ',' << ds.d(i, col);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace kinsdf
