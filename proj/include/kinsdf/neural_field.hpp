#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinsdf/field.hpp"

namespace kinsdf {

enum class Variant { rndf, multi_head_mlp, plain_mlp };

std::string variant_name(Variant v);
/// Accepts "rndf", "multi-head-mlp", "plain-mlp"; throws InvalidArgument
/// listing the valid names otherwise.
Variant parse_variant(const std::string& name);

struct ArchConfig {
  Variant variant = Variant::rndf;
  int latent_size = 64;  // K
  int encoding_frequencies = 4;  // L
  bool encode_q = true;
  bool encode_p = true;
  /// Hidden widths between the encoded input and the K-wide bottleneck.
  std::vector<int> backbone_widths{128};
  int head_residual_width = 32;
  /// Hidden widths of the regression block after the mid-level feature.
  std::vector<int> head_regression_widths{16};
  /// Hidden widths of the single-trunk variant.
  std::vector<int> plain_widths{128, 128, 128, 128};
  int m = 0;
  int n = 0;
  /// Affine normalization applied before encoding: (x - offset) * scale,
  /// x = [q, p]. Empty means identity.
  Eigen::VectorXd input_offset;
  Eigen::VectorXd input_scale;

  int input_dim() const { return m + 3; }
  int encoded_dim() const;
  void validate() const;
};

/// Positional encoding: x followed by sin(2^l pi x), cos(2^l pi x) for
/// l = 0..L-1 (all components of each block together).
Eigen::VectorXd positional_encode(const Eigen::VectorXd& x, int frequencies);

struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t offset = 0;  // weights (out x in, column-major) then bias (out)
  bool activated = true;   // GeLU after the affine map
  std::string name;
};

struct JacobianResult {
  Eigen::MatrixXd dd_dq;  // n x m
  Eigen::MatrixXd dd_dp;  // n x 3
};

/// Intermediates of a cached forward pass, consumed by backward().
struct ForwardCache {
  Eigen::MatrixXd scaled_input;
  Eigen::MatrixXd encoded;
  std::vector<Eigen::MatrixXd> layer_input;  // per layer
  std::vector<Eigen::MatrixXd> layer_slope;  // GeLU'(z) per activated layer
};

/// Configuration-conditioned link distance network (three variants).
class NeuralField final : public DistanceField {
 public:
  explicit NeuralField(ArchConfig arch);
  NeuralField(ArchConfig arch, Eigen::VectorXd params);

  const ArchConfig& arch() const { return arch_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t parameter_count() const override { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& mutable_params() { return params_; }
  void set_params(const Eigen::VectorXd& params);

  /// Weights ~ U(-sqrt(3 / fan_in), +sqrt(3 / fan_in)), biases
  /// ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  void initialize(std::uint64_t seed);

  std::size_t dof() const override { return static_cast<std::size_t>(arch_.m); }
  std::size_t link_count() const override { return static_cast<std::size_t>(arch_.n); }
  std::string describe() const override;

  Eigen::VectorXd forward(const Eigen::VectorXd& q, const Eigen::Vector3d& p) const;
  /// Stacked inputs X = [Q; P], (m+3) x B -> n x B.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, ForwardCache& cache) const;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const override;

  /// Reverse pass for upstream gradients `upstream` (n x B). Accumulates
  /// parameter gradients into `param_grad` when non-null (must be sized to
  /// parameter_count()) and returns input gradients, (m+3) x B.
  Eigen::MatrixXd backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                           Eigen::VectorXd* param_grad) const;

  JacobianResult input_jacobian(const Eigen::VectorXd& q, const Eigen::Vector3d& p) const;

  /// Vector-Jacobian product for points sharing one configuration:
  /// returns the (m+3) x B input gradient of sum(weights .* d_hat).
  Eigen::MatrixXd vjp(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& p, const Eigen::MatrixXd& weights,
                      Eigen::MatrixXd* values = nullptr) const override;

  /// Column-stacked [Q; P] helper.
  Eigen::MatrixXd stack_inputs(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const;

 private:
  friend class Float32Field;
  void build_layers();

  ArchConfig arch_;
  std::vector<LayerShape> layers_;
  Eigen::VectorXd params_;
};

/// Single-precision inference snapshot, used only for throughput runs.
class Float32Field {
 public:
  explicit Float32Field(const NeuralField& field);
  Eigen::MatrixXf forward_batch(const Eigen::MatrixXf& x) const;

 private:
  ArchConfig arch_;
  std::vector<LayerShape> layers_;
  Eigen::VectorXf params_;
};

}  // namespace kinsdf
