#include "kinsdf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "kinsdf/errors.hpp"
#include "kinsdf/rng.hpp"

namespace kinsdf {

std::string schedule_name(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule parse_schedule(const std::string& name) {
  if (name == "constant") return LrSchedule::constant;
  if (name == "cosine") return LrSchedule::cosine;
  throw InvalidArgument("unknown lr schedule '" + name + "' (valid: constant, cosine)");
}

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::sgd_momentum ? "sgd-momentum" : "adaptive-moment";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd-momentum") return OptimizerKind::sgd_momentum;
  if (name == "adaptive-moment") return OptimizerKind::adaptive_moment;
  throw InvalidArgument("unknown optimizer '" + name + "' (valid: sgd-momentum, adaptive-moment)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5)) {
    throw InvalidArgument("validation_fraction must lie in [0, 0.5]");
  }
  if (weight_decay < 0.0) throw InvalidArgument("weight_decay must be non-negative");
  if (checkpoint_every < 0 || patience < 0) throw InvalidArgument("checkpoint_every and patience must be non-negative");
}

double rmse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw DimensionMismatch("rmse: shape mismatch");
  if (pred.size() == 0) throw InvalidArgument("rmse: empty batch");
  return std::sqrt((pred - target).squaredNorm() / static_cast<double>(pred.size()));
}

double loss_and_gradient(const NeuralField& field, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                         Eigen::VectorXd* grad) {
  ForwardCache cache;
  const Eigen::MatrixXd pred = field.forward_batch(x, cache);
  const double loss = rmse_loss(pred, target);
  if (grad) {
    grad->setZero(static_cast<Eigen::Index>(field.parameter_count()));
    if (loss > 0.0 && std::isfinite(loss)) {
      const Eigen::MatrixXd upstream = (pred - target) / (static_cast<double>(pred.size()) * loss);
      field.backward(cache, upstream, grad);
    }
  }
  return loss;
}

ParamOptimizer::ParamOptimizer(OptimizerKind kind, Eigen::Index size, double weight_decay, double momentum)
    : kind_(kind),
      weight_decay_(weight_decay),
      momentum_(momentum),
      m1_(Eigen::VectorXd::Zero(size)),
      m2_(Eigen::VectorXd::Zero(kind == OptimizerKind::adaptive_moment ? size : 0)) {}

void ParamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (params.size() != m1_.size() || grad.size() != m1_.size()) throw DimensionMismatch("optimizer: size mismatch");
  ++t_;
  const Eigen::VectorXd g = grad + weight_decay_ * params;
  if (kind_ == OptimizerKind::sgd_momentum) {
    m1_ = momentum_ * m1_ + g;
    params -= lr * m1_;
    return;
  }
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  m1_ = b1 * m1_ + (1.0 - b1) * g;
  m2_ = b2 * m2_ + (1.0 - b2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() -= lr * (m1_.array() / c1) / ((m2_.array() / c2).sqrt() + eps);
}

void fit_input_normalization(ArchConfig& arch, const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) {
  if (q.cols() == 0) throw InvalidArgument("cannot fit normalization on an empty set");
  Eigen::MatrixXd x(q.rows() + 3, q.cols());
  x << q, p;
  const Eigen::VectorXd lo = x.rowwise().minCoeff();
  const Eigen::VectorXd hi = x.rowwise().maxCoeff();
  arch.input_offset = 0.5 * (lo + hi);
  arch.input_scale.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double half = 0.5 * (hi[i] - lo[i]);
    arch.input_scale[i] = half > 1e-12 ? 1.0 / half : 1.0;
  }
}

void write_log_record(std::ostream& out, const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_rmse_mm"] = r.train_rmse * 1e3;
  if (std::isfinite(r.val_rmse)) {
    j["val_rmse_mm"] = r.val_rmse * 1e3;
  } else {
    j["val_rmse_mm"] = nullptr;
  }
  j["lr"] = r.lr;
  j["wall_s"] = r.wall_seconds;
  out << j.dump() << '\n';
}

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

Split split_by_configuration(const SdfDataset& ds, double fraction, std::uint64_t seed) {
  Split s;
  if (fraction <= 0.0) {
    s.train.resize(ds.size());
    std::iota(s.train.begin(), s.train.end(), std::size_t{0});
    return s;
  }
  std::uint32_t max_config = 0;
  for (std::uint32_t c : ds.config_index) max_config = std::max(max_config, c);
  std::vector<std::uint32_t> configs(static_cast<std::size_t>(max_config) + 1);
  std::iota(configs.begin(), configs.end(), 0u);
  Rng rng = Rng::derive(seed, 0x76616c);
  for (std::size_t i = configs.size(); i > 1; --i) std::swap(configs[i - 1], configs[rng.index(i)]);
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(configs.size())));
  std::vector<bool> is_val(configs.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[configs[i]] = true;
  for (std::size_t r = 0; r < ds.size(); ++r) (is_val[ds.config_index[r]] ? s.val : s.train).push_back(r);
  if (s.train.empty()) throw InvalidArgument("validation split leaves no training records");
  return s;
}

Eigen::MatrixXd gather_inputs(const SdfDataset& ds, const std::vector<std::size_t>& idx, std::size_t begin,
                              std::size_t end) {
  const auto m = ds.q.rows();
  Eigen::MatrixXd x(m + 3, static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) {
    const auto c = static_cast<Eigen::Index>(i - begin);
    const auto r = static_cast<Eigen::Index>(idx[i]);
    x.col(c).head(m) = ds.q.col(r);
    x.col(c).tail(3) = ds.p.col(r);
  }
  return x;
}

Eigen::MatrixXd gather_targets(const SdfDataset& ds, const std::vector<std::size_t>& idx, std::size_t begin,
                               std::size_t end) {
  Eigen::MatrixXd y(ds.d.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) y.col(static_cast<Eigen::Index>(i - begin)) = ds.d.col(static_cast<Eigen::Index>(idx[i]));
  return y;
}

double subset_rmse(const NeuralField& field, const SdfDataset& ds, const std::vector<std::size_t>& idx) {
  constexpr std::size_t kChunk = 8192;
  double sq = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += kChunk) {
    const std::size_t e = std::min(idx.size(), b + kChunk);
    sq += (field.forward_batch(gather_inputs(ds, idx, b, e)) - gather_targets(ds, idx, b, e)).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(idx.size() * static_cast<std::size_t>(ds.d.rows())));
}

}  // namespace

TrainResult train(const SdfDataset& ds, const ArchConfig& arch_in, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (ds.size() == 0) throw InvalidArgument("training dataset is empty");
  ArchConfig arch = arch_in;
  if (arch.m == 0) arch.m = static_cast<int>(ds.q.rows());
  if (arch.n == 0) arch.n = static_cast<int>(ds.d.rows());
  if (arch.m != ds.q.rows() || arch.n != ds.d.rows()) {
    throw MismatchError("dataset shape (m=" + std::to_string(ds.q.rows()) + ", n=" + std::to_string(ds.d.rows()) +
                        ") does not match the architecture");
  }

  Split split = split_by_configuration(ds, cfg.validation_fraction, cfg.seed);
  if (arch.input_scale.size() == 0) {
    const SdfDataset tr = ds.select(split.train);
    fit_input_normalization(arch, tr.q, tr.p);
  }

  NeuralField field(arch);
  field.initialize(cfg.seed);
  NeuralField best = field;
  ParamOptimizer opt(cfg.optimizer, static_cast<Eigen::Index>(field.parameter_count()), cfg.weight_decay, cfg.momentum);

  TrainResult result{best, {}, false, 0, std::numeric_limits<double>::infinity(), split.train, split.val};
  const bool has_val = !split.val.empty();
  Eigen::VectorXd grad(static_cast<Eigen::Index>(field.parameter_count()));
  std::vector<std::size_t> order = split.train;
  int stale = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    if (cfg.lr_schedule == LrSchedule::cosine) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * (epoch - 1) / cfg.epochs));
    }
    Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::sort(order.begin(), order.end());
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double sq_sum = 0.0;
    bool finite = true;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      if (hooks.on_batch) hooks.on_batch(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e)));
      const Eigen::MatrixXd x = gather_inputs(ds, order, b, e);
      const Eigen::MatrixXd y = gather_targets(ds, order, b, e);
      const double loss = loss_and_gradient(field, x, y, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        finite = false;
        break;
      }
      sq_sum += loss * loss * static_cast<double>(y.size());
      opt.step(field.mutable_params(), grad, lr);
    }
    if (!finite || !field.params().allFinite()) {
      result.diverged = true;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_rmse = std::sqrt(sq_sum / static_cast<double>(order.size() * static_cast<std::size_t>(arch.n)));
    rec.val_rmse = has_val ? subset_rmse(field, ds, split.val) : std::numeric_limits<double>::quiet_NaN();
    rec.lr = lr;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    const double score = has_val ? rec.val_rmse : rec.train_rmse;
    if (!std::isfinite(score)) {
      result.diverged = true;
      break;
    }
    if (score < result.best_val_rmse) {
      result.best_val_rmse = score;
      result.best_epoch = epoch;
      best = field;
      stale = 0;
    } else {
      ++stale;
    }
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && hooks.on_checkpoint) hooks.on_checkpoint(epoch, best);
    if (cfg.patience > 0 && stale >= cfg.patience) break;
  }
  result.field = std::move(best);
  return result;
}

}  // namespace kinsdf
