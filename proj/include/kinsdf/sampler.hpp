#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/distance_oracle.hpp"
#include "kinsdf/rng.hpp"
#include "kinsdf/robot_model.hpp"

namespace kinsdf {

struct SamplerConfig {
  std::uint64_t configs_count = 1000;
  std::uint64_t points_per_config = 200;
  double d_s = 0.0;  // near-surface band half-width, meters
  double near_surface_fraction = 0.5;
  double inside_fraction = 0.5;
  double limit_expansion = 0.05;
  Eigen::AlignedBox3d workspace;
  std::uint64_t seed = 0;
  /// Parallel generation workers; output does not depend on this.
  unsigned workers = 1;

  /// Defaults derived from the robot: d_s = 5% of reach, workspace box =
  /// base position +- 1.05 * reach.
  static SamplerConfig defaults_for(const RobotModel& model);
  void validate(const RobotModel& model) const;
};

enum RecordTag : std::uint8_t {
  kTagNearSurface = 1 << 0,
  kTagInside = 1 << 1,
};

struct DatasetMetadata {
  std::string robot_name;
  std::uint64_t robot_hash = 0;
  std::uint32_t dof = 0;
  std::uint32_t links = 0;
  SamplerConfig config;
  OracleKind oracle = OracleKind::primitives;
};

/// Column-major records: column i of `q`, `p`, `d` together form record i.
struct SdfDataset {
  DatasetMetadata meta;
  Eigen::MatrixXd q;  // m x N
  Eigen::Matrix3Xd p;  // 3 x N
  Eigen::MatrixXd d;  // n x N
  std::vector<std::uint32_t> config_index;
  std::vector<std::uint8_t> tags;

  std::size_t size() const { return tags.size(); }
  double inside_fraction() const;
  /// Subset of records (metadata copied).
  SdfDataset select(const std::vector<std::size_t>& indices) const;
};

/// Uniform on [lo - e, hi + e] per joint with e = expansion * (hi - lo).
Eigen::VectorXd sample_configuration(const RobotModel& model, double expansion, Rng& rng);

/// Points with |min_k d_k| <= d_s, generated by offsetting area-uniform
/// surface samples along their normal by U[-d_s, d_s]; violations are
/// rejected. Throws SamplingError after 100 * count attempts.
std::vector<Eigen::Vector3d> sample_near_surface(const RobotModel& model, const Eigen::VectorXd& q, double d_s,
                                                 std::size_t count, Rng& rng);

SdfDataset generate_dataset(const RobotModel& model, const SamplerConfig& config);

/// Little-endian binary format, see docs/formats.md.
void write_dataset(const SdfDataset& dataset, const std::filesystem::path& path);
SdfDataset read_dataset(const std::filesystem::path& path);
void export_dataset_csv(const SdfDataset& dataset, const std::filesystem::path& path);

}  // namespace kinsdf
