#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/field.hpp"
#include "kinsdf/mesh.hpp"
#include "kinsdf/neural_field.hpp"
#include "kinsdf/sampler.hpp"

namespace kinsdf {

/// Thresholds tuned for an 800 mm reach arm, scaled linearly with reach.
inline constexpr double kReferenceReach = 0.8;
inline constexpr double kReferenceCloseThreshold = 0.1;
inline constexpr double kReferenceBand = 0.03;
double scaled_close_threshold(double reach);
double scaled_band(double reach);

struct LinkRmse {
  std::optional<double> close;  // meters; absent when the partition is empty
  std::optional<double> far;
  std::size_t close_count = 0;
  std::size_t far_count = 0;
};

struct RmseReport {
  double close_threshold = 0.0;
  std::vector<LinkRmse> links;
  /// Mean of the per-link values that are present.
  std::optional<double> avg_close;
  std::optional<double> avg_far;
  /// Last-link over first-link close RMSE, when both exist and the first is
  /// nonzero.
  std::optional<double> accumulation_ratio;
};

/// Sample i is "close" for link k iff |d_k| <= close_threshold.
RmseReport eval_rmse(const DistanceField& field, const SdfDataset& test, double close_threshold);

struct ClassificationReport {
  double band = 0.0;
  double accuracy = 0.0;
  std::size_t evaluated = 0;  // (sample, link) pairs inside the band
  std::size_t correct = 0;
  std::size_t excluded_zeros = 0;  // true distance within the surface epsilon
};

/// Sign agreement over (sample, link) pairs with |d_k| < band; exact zeros are
/// counted separately. Throws InvalidArgument when no pair is in the band.
ClassificationReport eval_classification(const DistanceField& field, const SdfDataset& test, double band);

struct TimingRow {
  std::string label;
  std::size_t batch_size = 0;
  int repeats = 0;
  double batch_seconds = 0.0;  // mean over repeats
  double per_sample_us = 0.0;
  double throughput = 0.0;  // samples per second
  bool float32 = false;
};

/// Times forward inference on pre-generated inputs spread over the field's
/// normalized input range; one untimed warm-up, then the mean of `repeats`.
TimingRow bench_throughput(const NeuralField& field, std::size_t batch_size, int repeats, bool float32,
                           std::uint64_t seed);

/// Per-query GJK time for random 12-vertex polytope pairs; per-configuration
/// cost is reported as `pairs` times the per-query time.
TimingRow bench_gjk(std::size_t queries, std::size_t pairs, std::uint64_t seed);

struct EvalReport {
  std::string field_description;
  std::size_t parameter_count = 0;
  std::string model_hash;
  std::string dataset_hash;
  std::size_t test_size = 0;
  RmseReport rmse;
  std::optional<ClassificationReport> classification;
  std::vector<TimingRow> timings;
  unsigned threads = 1;
};

/// Human-readable table (millimeters).
std::string format_report_text(const EvalReport& report);
/// Machine-readable JSON document.
std::string format_report_json(const EvalReport& report);

struct IsosurfaceResult {
  TriangleMesh mesh;
  double spacing = 0.0;
  std::string warning;  // set when the mesh is empty
};

/// Level set of g(p) = min_k field(q, p)_k over a resolution^3 sample grid
/// covering `box`. Cubes are split into six tetrahedra along a shared main
/// diagonal; edge vertices are welded, so the mesh is closed wherever the
/// surface does not touch the box.
IsosurfaceResult extract_isosurface(const DistanceField& field, const Eigen::VectorXd& q, double level,
                                    const Eigen::AlignedBox3d& box, int resolution);

/// Same extraction over precomputed grid values (x fastest, then y, then z).
IsosurfaceResult extract_isosurface_grid(const std::vector<double>& values, const Eigen::AlignedBox3d& box,
                                         int resolution, double level);

}  // namespace kinsdf
