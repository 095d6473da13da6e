#include "kinsdf/evaluator.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "kinsdf/distance_oracle.hpp"
#include "kinsdf/errors.hpp"
#include "kinsdf/gjk.hpp"
#include "kinsdf/rng.hpp"

namespace kinsdf {

double scaled_close_threshold(double reach) { return kReferenceCloseThreshold * reach / kReferenceReach; }
double scaled_band(double reach) { return kReferenceBand * reach / kReferenceReach; }

namespace {

void check_shapes(const DistanceField& field, const SdfDataset& test) {
  if (field.dof() != static_cast<std::size_t>(test.q.rows()) ||
      field.link_count() != static_cast<std::size_t>(test.d.rows())) {
    throw MismatchError("field shape (m=" + std::to_string(field.dof()) + ", n=" + std::to_string(field.link_count()) +
                        ") does not match the test set");
  }
}

Eigen::MatrixXd predict_all(const DistanceField& field, const SdfDataset& test) {
  return field.predict(test.q, test.p);
}

}  // namespace

RmseReport eval_rmse(const DistanceField& field, const SdfDataset& test, double close_threshold) {
  if (!(close_threshold > 0.0)) throw InvalidArgument("close threshold must be positive");
  check_shapes(field, test);
  const Eigen::MatrixXd pred = predict_all(field, test);
  const Eigen::Index n = test.d.rows();
  RmseReport rep;
  rep.close_threshold = close_threshold;
  rep.links.resize(static_cast<std::size_t>(n));
  double close_sum = 0.0;
  double far_sum = 0.0;
  int close_links = 0;
  int far_links = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double sq_close = 0.0;
    double sq_far = 0.0;
    LinkRmse& lr = rep.links[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < test.d.cols(); ++i) {
      const double e = pred(k, i) - test.d(k, i);
      if (std::abs(test.d(k, i)) <= close_threshold) {
        sq_close += e * e;
        ++lr.close_count;
      } else {
        sq_far += e * e;
        ++lr.far_count;
      }
    }
    if (lr.close_count > 0) {
      lr.close = std::sqrt(sq_close / static_cast<double>(lr.close_count));
      close_sum += *lr.close;
      ++close_links;
    }
    if (lr.far_count > 0) {
      lr.far = std::sqrt(sq_far / static_cast<double>(lr.far_count));
      far_sum += *lr.far;
      ++far_links;
    }
  }
  if (close_links > 0) rep.avg_close = close_sum / close_links;
  if (far_links > 0) rep.avg_far = far_sum / far_links;
  const LinkRmse& first = rep.links.front();
  const LinkRmse& last = rep.links.back();
  if (first.close && last.close && *first.close > 0.0) rep.accumulation_ratio = *last.close / *first.close;
  return rep;
}

ClassificationReport eval_classification(const DistanceField& field, const SdfDataset& test, double band) {
  if (!(band > 0.0)) throw InvalidArgument("classification band must be positive");
  check_shapes(field, test);
  const Eigen::MatrixXd pred = predict_all(field, test);
  ClassificationReport rep;
  rep.band = band;
  for (Eigen::Index i = 0; i < test.d.cols(); ++i) {
    for (Eigen::Index k = 0; k < test.d.rows(); ++k) {
      const double t = test.d(k, i);
      if (!(std::abs(t) < band)) continue;
      if (std::abs(t) <= kSurfaceEpsilon) {
        ++rep.excluded_zeros;
        continue;
      }
      ++rep.evaluated;
      const double s = pred(k, i);
      if (s != 0.0 && (s > 0.0) == (t > 0.0)) ++rep.correct;
    }
  }
  if (rep.evaluated == 0) throw InvalidArgument("no test pairs fall inside the classification band");
  rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.evaluated);
  return rep;
}

TimingRow bench_throughput(const NeuralField& field, std::size_t batch_size, int repeats, bool float32,
                           std::uint64_t seed) {
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
  const ArchConfig& a = field.arch();
  Rng rng(seed);
  Eigen::MatrixXd x(a.input_dim(), static_cast<Eigen::Index>(batch_size));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double u = rng.uniform(-1.0, 1.0);
      x(r, c) = a.input_scale.size() > 0 ? a.input_offset[r] + u / a.input_scale[r] : u;
    }
  }
  const Eigen::MatrixXf xf = x.cast<float>();
  const Float32Field f32(field);

  double sink = 0.0;
  auto run = [&] {
    if (float32) {
      sink += static_cast<double>(f32.forward_batch(xf)(0, 0));
    } else {
      sink += field.forward_batch(x)(0, 0);
    }
  };
  run();
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) run();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!std::isfinite(sink)) throw NumericalError("non-finite benchmark output");

  TimingRow row;
  row.label = field.describe();
  row.batch_size = batch_size;
  row.repeats = repeats;
  row.batch_seconds = total / repeats;
  row.per_sample_us = row.batch_seconds / static_cast<double>(batch_size) * 1e6;
  row.throughput = static_cast<double>(batch_size) / row.batch_seconds;
  row.float32 = float32;
  return row;
}

TimingRow bench_gjk(std::size_t queries, std::size_t pairs, std::uint64_t seed) {
  if (queries < 1) throw InvalidArgument("queries must be at least 1");
  Rng rng(seed);
  auto polytope = [&] {
    ConvexShape s;
    for (int i = 0; i < 12; ++i) s.vertices.push_back(0.05 * rng.unit_vector() * rng.uniform(0.5, 1.0));
    return s;
  };
  std::vector<ConvexShape> a(queries);
  std::vector<ConvexShape> b(queries);
  std::vector<Pose> pa(queries);
  std::vector<Pose> pb(queries);
  for (std::size_t i = 0; i < queries; ++i) {
    a[i] = polytope();
    b[i] = polytope();
    for (Pose* pose : {&pa[i], &pb[i]}) {
      *pose = Pose::from_axis_angle(rng.unit_vector(), rng.uniform(0.0, 3.14));
      pose->translation = 0.3 * rng.unit_vector();
    }
  }
  double sink = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(queries, 16); ++i) sink += gjk_distance(a[i], pa[i], b[i], pb[i]).distance;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < queries; ++i) sink += gjk_distance(a[i], pa[i], b[i], pb[i]).distance;
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!std::isfinite(sink)) throw NumericalError("non-finite GJK benchmark output");

  TimingRow row;
  row.label = "gjk x" + std::to_string(pairs) + " pairs";
  row.batch_size = 1;
  row.repeats = static_cast<int>(queries);
  row.per_sample_us = total / static_cast<double>(queries) * 1e6 * static_cast<double>(pairs);
  row.batch_seconds = row.per_sample_us * 1e-6;
  row.throughput = 1.0 / row.batch_seconds;
  return row;
}

namespace {

std::string mm(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << *v * 1e3;
  return os.str();
}

}  // namespace

std::string format_report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "field: " << r.field_description << "\n";
  os << "parameters: " << r.parameter_count << "\n";
  if (!r.model_hash.empty()) os << "model hash: " << r.model_hash << "\n";
  if (!r.dataset_hash.empty()) os << "test set hash: " << r.dataset_hash << "\n";
  os << "test records: " << r.test_size << "\n";
  os << "close threshold: " << r.rmse.close_threshold * 1e3 << " mm\n\n";
  os << "link   close_rmse_mm   far_rmse_mm   close_n   far_n\n";
  for (std::size_t k = 0; k < r.rmse.links.size(); ++k) {
    const LinkRmse& l = r.rmse.links[k];
    os << std::setw(4) << k << std::setw(16) << mm(l.close) << std::setw(14) << mm(l.far) << std::setw(10)
       << l.close_count << std::setw(8) << l.far_count << "\n";
  }
  os << " avg" << std::setw(16) << mm(r.rmse.avg_close) << std::setw(14) << mm(r.rmse.avg_far) << "\n";
  if (r.rmse.accumulation_ratio) os << "last/first close ratio: " << *r.rmse.accumulation_ratio << "\n";
  if (r.classification) {
    const ClassificationReport& c = *r.classification;
    os << "\nsign accuracy (|d| < " << c.band * 1e3 << " mm): " << std::setprecision(5) << c.accuracy << " over "
       << c.evaluated << " pairs, " << c.excluded_zeros << " exact zeros excluded\n";
  }
  if (!r.timings.empty()) {
    os << "\nthreads: " << r.threads << "\n";
    os << "label                              batch   repeats   batch_s        us/sample      samples/s   precision\n";
    for (const TimingRow& t : r.timings) {
      os << std::left << std::setw(34) << t.label << std::right << std::setw(7) << t.batch_size << std::setw(10)
         << t.repeats << std::setw(14) << std::setprecision(6) << t.batch_seconds << std::setw(14) << t.per_sample_us
         << std::setw(14) << std::setprecision(6) << t.throughput << "   " << (t.float32 ? "f32" : "f64") << "\n";
    }
  }
  return os.str();
}

std::string format_report_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v * 1e3) : json(nullptr); };
  json j;
  j["field"] = r.field_description;
  j["parameters"] = r.parameter_count;
  j["model_hash"] = r.model_hash;
  j["dataset_hash"] = r.dataset_hash;
  j["test_records"] = r.test_size;
  j["close_threshold_mm"] = r.rmse.close_threshold * 1e3;
  json links = json::array();
  for (const LinkRmse& l : r.rmse.links) {
    links.push_back({{"close_rmse_mm", opt(l.close)},
                     {"far_rmse_mm", opt(l.far)},
                     {"close_count", l.close_count},
                     {"far_count", l.far_count}});
  }
  j["links"] = links;
  j["avg_close_rmse_mm"] = opt(r.rmse.avg_close);
  j["avg_far_rmse_mm"] = opt(r.rmse.avg_far);
  j["accumulation_ratio"] = r.rmse.accumulation_ratio ? json(*r.rmse.accumulation_ratio) : json(nullptr);
  if (r.classification) {
    j["classification"] = {{"band_mm", r.classification->band * 1e3},
                           {"accuracy", r.classification->accuracy},
                           {"evaluated", r.classification->evaluated},
                           {"excluded_zeros", r.classification->excluded_zeros}};
  }
  json timings = json::array();
  for (const TimingRow& t : r.timings) {
    timings.push_back({{"label", t.label},
                       {"batch_size", t.batch_size},
                       {"repeats", t.repeats},
                       {"batch_seconds", t.batch_seconds},
                       {"per_sample_us", t.per_sample_us},
                       {"throughput", t.throughput},
                       {"float32", t.float32}});
  }
  j["timings"] = timings;
  j["threads"] = r.threads;
  return j.dump(2);
}

}  // namespace kinsdf
