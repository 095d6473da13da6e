#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/neural_field.hpp"
#include "kinsdf/sampler.hpp"

namespace kinsdf {

enum class LrSchedule { constant, cosine };
enum class OptimizerKind { sgd_momentum, adaptive_moment };

std::string schedule_name(LrSchedule s);
LrSchedule parse_schedule(const std::string& name);
std::string optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  LrSchedule lr_schedule = LrSchedule::cosine;
  OptimizerKind optimizer = OptimizerKind::adaptive_moment;
  double weight_decay = 1e-6;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  /// Invoke the checkpoint hook every this many epochs (0 = never).
  int checkpoint_every = 0;
  double validation_fraction = 0.1;
  /// Stop after this many epochs without a validation improvement (0 = off).
  int patience = 10;

  void validate() const;
};

/// sqrt(mean over batch and links of (pred - target)^2). Throws
/// InvalidArgument on an empty batch and DimensionMismatch on shape errors.
double rmse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// RMSE over a batch of stacked inputs, with the parameter gradient written to
/// `grad` when non-null.
double loss_and_gradient(const NeuralField& field, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                         Eigen::VectorXd* grad);

/// First-order optimizer with L2 weight decay folded into the gradient.
class ParamOptimizer {
 public:
  ParamOptimizer(OptimizerKind kind, Eigen::Index size, double weight_decay, double momentum = 0.9);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

 private:
  OptimizerKind kind_;
  double weight_decay_;
  double momentum_;
  Eigen::VectorXd m1_;
  Eigen::VectorXd m2_;
  std::uint64_t t_ = 0;
};

/// Maps the observed range of every input coordinate onto [-1, 1].
void fit_input_normalization(ArchConfig& arch, const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p);

struct EpochRecord {
  int epoch = 0;
  double train_rmse = 0.0;  // meters
  double val_rmse = 0.0;    // meters; NaN when there is no validation split
  double lr = 0.0;
  double wall_seconds = 0.0;
};

/// One JSON object per line, distances in millimeters.
void write_log_record(std::ostream& out, const EpochRecord& record);

struct TrainHooks {
  /// Dataset record indices of every mini-batch, before the update.
  std::function<void(const std::vector<std::size_t>&)> on_batch;
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(int epoch, const NeuralField& best)> on_checkpoint;
};

struct TrainResult {
  NeuralField field;  // best-validation parameters
  std::vector<EpochRecord> log;
  bool diverged = false;
  int best_epoch = 0;
  double best_val_rmse = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// Validation records are whole held-out configurations chosen by the seed.
/// Bit-reproducible for identical (dataset, arch, cfg). On a non-finite loss
/// the run stops and returns the best parameters seen with diverged = true.
TrainResult train(const SdfDataset& dataset, const ArchConfig& arch, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace kinsdf
