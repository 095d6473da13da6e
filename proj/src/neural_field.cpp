#include "kinsdf/neural_field.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <type_traits>

#include <unsupported/Eigen/SpecialFunctions>

#include "kinsdf/errors.hpp"
#include "kinsdf/normal_cdf.hpp"
#include "kinsdf/rng.hpp"

namespace kinsdf {

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Indices into the layer table for the trunk-and-heads variants.
struct Topology {
  int trunk = 0;       // hidden layers before the bottleneck
  int bottleneck = 0;
  int skip = 0;
  int head_base = 0;
  int head_stride = 0;  // proj, residual, regression hidden..., output
  int proj(int k) const { return head_base + k * head_stride; }
  int residual(int k) const { return proj(k) + 1; }
  int regression(int k, int j) const { return proj(k) + 2 + j; }
  int output(int k) const { return proj(k) + head_stride - 1; }
};

Topology topology(const ArchConfig& a) {
  Topology t;
  t.trunk = static_cast<int>(a.backbone_widths.size());
  t.bottleneck = t.trunk;
  t.skip = t.trunk + 1;
  t.head_base = t.trunk + 2;
  t.head_stride = 3 + static_cast<int>(a.head_regression_widths.size());
  return t;
}

std::vector<int> encoded_rows(const ArchConfig& a) {
  std::vector<int> rows;
  for (int r = 0; r < a.input_dim(); ++r) {
    if (r < a.m ? a.encode_q : a.encode_p) rows.push_back(r);
  }
  return rows;
}

// GeLU in place; optionally stores the slope. Double precision goes through
// a full-accuracy normal CDF so the slope stays accurate in the tails.
void gelu(Mat<double>& z, Mat<double>* slope) {
  if (slope) slope->resize(z.rows(), z.cols());
  kinsdf::gelu(z.data(), slope ? slope->data() : nullptr, static_cast<std::size_t>(z.size()));
}

void gelu(Mat<float>& z, Mat<float>*) {
  z.array() = 0.5f * z.array() * (1.0f + (z.array() * static_cast<float>(std::numbers::sqrt2 * 0.5)).erf());
}

template <class S>
struct Net {
  const ArchConfig& arch;
  const std::vector<LayerShape>& layers;
  const S* params;
  ForwardCache* cache;  // only for S = double

  Eigen::Map<const Mat<S>> weight(int l) const {
    const LayerShape& s = layers[static_cast<std::size_t>(l)];
    return {params + s.offset, s.out, s.in};
  }
  Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> bias(int l) const {
    const LayerShape& s = layers[static_cast<std::size_t>(l)];
    return {params + s.offset + static_cast<std::size_t>(s.out) * s.in, s.out};
  }

  Mat<S> layer(int l, const Mat<S>& in) const {
    Mat<S> z = weight(l) * in;
    z.colwise() += bias(l);
    const LayerShape& s = layers[static_cast<std::size_t>(l)];
    if constexpr (std::is_same_v<S, double>) {
      if (cache) {
        cache->layer_input[static_cast<std::size_t>(l)] = in;
        if (s.activated) gelu(z, &cache->layer_slope[static_cast<std::size_t>(l)]);
        return z;
      }
    }
    if (s.activated) gelu(z, nullptr);
    return z;
  }

  Mat<S> encode(const Mat<S>& xs) const {
    const std::vector<int> rows = encoded_rows(arch);
    const int d = arch.input_dim();
    const int e = static_cast<int>(rows.size());
    Mat<S> out(arch.encoded_dim(), xs.cols());
    out.topRows(d) = xs;
    int row = d;
    for (int l = 0; l < arch.encoding_frequencies; ++l) {
      const S w = static_cast<S>(std::ldexp(std::numbers::pi, l));
      for (int i = 0; i < e; ++i) out.row(row + i) = (w * xs.row(rows[static_cast<std::size_t>(i)])).array().sin();
      for (int i = 0; i < e; ++i) out.row(row + e + i) = (w * xs.row(rows[static_cast<std::size_t>(i)])).array().cos();
      row += 2 * e;
    }
    return out;
  }

  Mat<S> run(const Mat<S>& x) const {
    Mat<S> xs = x;
    if (arch.input_scale.size() > 0) {
      for (int r = 0; r < arch.input_dim(); ++r) {
        xs.row(r).array() = (xs.row(r).array() - static_cast<S>(arch.input_offset[r])) * static_cast<S>(arch.input_scale[r]);
      }
    }
    Mat<S> enc = encode(xs);
    if constexpr (std::is_same_v<S, double>) {
      if (cache) {
        cache->scaled_input = xs;
        cache->encoded = enc;
      }
    }
    const int nl = static_cast<int>(layers.size());
    if (arch.variant == Variant::plain_mlp) {
      Mat<S> h = std::move(enc);
      for (int l = 0; l < nl; ++l) h = layer(l, h);
      return h;
    }

    const Topology t = topology(arch);
    Mat<S> h = enc;
    for (int l = 0; l <= t.bottleneck; ++l) h = layer(l, h);
    Mat<S> skip_in(h.rows() + enc.rows(), h.cols());
    skip_in << h, enc;
    const Mat<S> g = layer(t.skip, skip_in);

    Mat<S> out(arch.n, x.cols());
    Mat<S> f_prev;
    const bool chained = arch.variant == Variant::rndf;
    for (int k = 0; k < arch.n; ++k) {
      Mat<S> a;
      if (chained && k > 0) {
        Mat<S> in(g.rows() + f_prev.rows(), g.cols());
        in << g, f_prev;
        a = layer(t.proj(k), in);
      } else {
        a = layer(t.proj(k), g);
      }
      Mat<S> f = a + layer(t.residual(k), a);
      Mat<S> r = f;
      for (std::size_t j = 0; j < arch.head_regression_widths.size(); ++j) r = layer(t.regression(k, static_cast<int>(j)), r);
      out.row(k) = layer(t.output(k), r);
      f_prev = std::move(f);
    }
    return out;
  }
};

// Uncached inference runs in column chunks small enough for the layer
// activations to stay in L2.
constexpr Eigen::Index kInferenceChunk = 256;

template <class S>
Mat<S> chunked(const Mat<S>& x, const Net<S>& net) {
  if (x.cols() <= kInferenceChunk) return net.run(x);
  Mat<S> out(net.arch.n, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); c += kInferenceChunk) {
    const Eigen::Index len = std::min(kInferenceChunk, x.cols() - c);
    out.middleCols(c, len) = net.run(x.middleCols(c, len));
  }
  return out;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::rndf: return "rndf";
    case Variant::multi_head_mlp: return "multi-head-mlp";
    case Variant::plain_mlp: return "plain-mlp";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "rndf") return Variant::rndf;
  if (name == "multi-head-mlp") return Variant::multi_head_mlp;
  if (name == "plain-mlp") return Variant::plain_mlp;
  throw InvalidArgument("unknown variant '" + name + "' (valid: rndf, multi-head-mlp, plain-mlp)");
}

int ArchConfig::encoded_dim() const {
  const int encoded = (encode_q ? m : 0) + (encode_p ? 3 : 0);
  return input_dim() + 2 * encoding_frequencies * encoded;
}

void ArchConfig::validate() const {
  if (m < 0 || n < 1) throw InvalidArgument("architecture needs m >= 0 and n >= 1");
  if (latent_size < 1) throw InvalidArgument("latent size must be positive");
  if (encoding_frequencies < 0 || encoding_frequencies > 16) throw InvalidArgument("encoding frequencies must be in [0, 16]");
  if (head_residual_width < 1) throw InvalidArgument("head width must be positive");
  for (const auto* widths : {&backbone_widths, &head_regression_widths, &plain_widths}) {
    for (int w : *widths) {
      if (w < 1) throw InvalidArgument("layer widths must be positive");
    }
  }
  if (input_offset.size() != input_scale.size()) throw InvalidArgument("input offset and scale sizes differ");
  if (input_scale.size() != 0) {
    if (input_scale.size() != input_dim()) throw InvalidArgument("input normalization must have m + 3 entries");
    if (!input_scale.allFinite() || !input_offset.allFinite() || (input_scale.array() == 0.0).any()) {
      throw InvalidArgument("input normalization must be finite with nonzero scale");
    }
  }
}

Eigen::VectorXd positional_encode(const Eigen::VectorXd& x, int frequencies) {
  if (frequencies < 0) throw InvalidArgument("frequencies must be non-negative");
  const Eigen::Index d = x.size();
  Eigen::VectorXd out(d * (1 + 2 * frequencies));
  out.head(d) = x;
  for (int l = 0; l < frequencies; ++l) {
    const double w = std::ldexp(std::numbers::pi, l);
    out.segment(d * (1 + 2 * l), d) = (w * x).array().sin();
    out.segment(d * (2 + 2 * l), d) = (w * x).array().cos();
  }
  return out;
}

NeuralField::NeuralField(ArchConfig arch) : arch_(std::move(arch)) {
  arch_.validate();
  build_layers();
}

NeuralField::NeuralField(ArchConfig arch, Eigen::VectorXd params) : NeuralField(std::move(arch)) {
  set_params(params);
}

void NeuralField::set_params(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) {
    throw DimensionMismatch("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                            std::to_string(params_.size()));
  }
  params_ = params;
}

void NeuralField::build_layers() {
  layers_.clear();
  std::size_t offset = 0;
  auto add = [&](int in, int out, bool act, std::string name) {
    layers_.push_back({in, out, offset, act, std::move(name)});
    offset += static_cast<std::size_t>(in) * out + out;
  };
  const int e = arch_.encoded_dim();
  if (arch_.variant == Variant::plain_mlp) {
    int prev = e;
    for (std::size_t i = 0; i < arch_.plain_widths.size(); ++i) {
      add(prev, arch_.plain_widths[i], true, "hidden" + std::to_string(i));
      prev = arch_.plain_widths[i];
    }
    add(prev, arch_.n, false, "output");
  } else {
    const int k = arch_.latent_size;
    const int w = arch_.head_residual_width;
    int prev = e;
    for (std::size_t i = 0; i < arch_.backbone_widths.size(); ++i) {
      add(prev, arch_.backbone_widths[i], true, "backbone" + std::to_string(i));
      prev = arch_.backbone_widths[i];
    }
    add(prev, k, true, "bottleneck");
    add(k + e, k, true, "skip");
    for (int h = 0; h < arch_.n; ++h) {
      const std::string p = "head" + std::to_string(h) + ".";
      const bool chained = arch_.variant == Variant::rndf && h > 0;
      add(chained ? k + w : k, w, true, p + "proj");
      add(w, w, true, p + "residual");
      int rp = w;
      for (std::size_t j = 0; j < arch_.head_regression_widths.size(); ++j) {
        add(rp, arch_.head_regression_widths[j], true, p + "reg" + std::to_string(j));
        rp = arch_.head_regression_widths[j];
      }
      add(rp, 1, false, p + "output");
    }
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

void NeuralField::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (const LayerShape& s : layers_) {
    const double wb = std::sqrt(3.0 / s.in);
    const double bb = 1.0 / std::sqrt(static_cast<double>(s.in));
    const std::size_t nw = static_cast<std::size_t>(s.in) * s.out;
    for (std::size_t i = 0; i < nw; ++i) params_[static_cast<Eigen::Index>(s.offset + i)] = rng.uniform(-wb, wb);
    for (int i = 0; i < s.out; ++i) params_[static_cast<Eigen::Index>(s.offset + nw + i)] = rng.uniform(-bb, bb);
  }
}

std::string NeuralField::describe() const {
  std::ostringstream os;
  os << variant_name(arch_.variant) << "(K=" << arch_.latent_size << ", L=" << arch_.encoding_frequencies
     << ", params=" << parameter_count() << ")";
  return os.str();
}

Eigen::MatrixXd NeuralField::stack_inputs(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const {
  if (q.rows() != arch_.m || q.cols() != p.cols()) {
    throw DimensionMismatch("expected q of " + std::to_string(arch_.m) + " rows and matching column counts");
  }
  Eigen::MatrixXd x(arch_.m + 3, q.cols());
  x << q, p;
  return x;
}

Eigen::VectorXd NeuralField::forward(const Eigen::VectorXd& q, const Eigen::Vector3d& p) const {
  if (q.size() != arch_.m) throw DimensionMismatch("configuration has wrong length");
  Eigen::MatrixXd x(arch_.m + 3, 1);
  x << q, p;
  return forward_batch(x);
}

Eigen::MatrixXd NeuralField::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.rows() != arch_.input_dim()) throw DimensionMismatch("input batch must have m + 3 rows");
  return chunked(x, Net<double>{arch_, layers_, params_.data(), nullptr});
}

Eigen::MatrixXd NeuralField::forward_batch(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  if (x.rows() != arch_.input_dim()) throw DimensionMismatch("input batch must have m + 3 rows");
  cache.layer_input.assign(layers_.size(), {});
  cache.layer_slope.assign(layers_.size(), {});
  return Net<double>{arch_, layers_, params_.data(), &cache}.run(x);
}

Eigen::MatrixXd NeuralField::predict(const Eigen::MatrixXd& q, const Eigen::Matrix3Xd& p) const {
  return forward_batch(stack_inputs(q, p));
}

Eigen::MatrixXd NeuralField::backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                                      Eigen::VectorXd* param_grad) const {
  if (upstream.rows() != arch_.n || upstream.cols() != cache.encoded.cols()) {
    throw DimensionMismatch("upstream gradient shape does not match the cached batch");
  }
  if (param_grad && param_grad->size() != params_.size()) throw DimensionMismatch("gradient buffer has wrong size");

  // Reverse through one affine(+GeLU) layer; returns the input gradient.
  auto back = [&](int l, const Eigen::MatrixXd& dout) -> Eigen::MatrixXd {
    const LayerShape& s = layers_[static_cast<std::size_t>(l)];
    Eigen::MatrixXd dz = s.activated ? Eigen::MatrixXd(dout.cwiseProduct(cache.layer_slope[static_cast<std::size_t>(l)])) : dout;
    if (param_grad) {
      Eigen::Map<Eigen::MatrixXd> gw(param_grad->data() + s.offset, s.out, s.in);
      gw.noalias() += dz * cache.layer_input[static_cast<std::size_t>(l)].transpose();
      Eigen::Map<Eigen::VectorXd> gb(param_grad->data() + s.offset + static_cast<std::size_t>(s.out) * s.in, s.out);
      gb += dz.rowwise().sum();
    }
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + s.offset, s.out, s.in);
    return w.transpose() * dz;
  };

  const Eigen::Index batch = upstream.cols();
  Eigen::MatrixXd denc;
  if (arch_.variant == Variant::plain_mlp) {
    Eigen::MatrixXd dh = upstream;
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) dh = back(l, dh);
    denc = std::move(dh);
  } else {
    const Topology t = topology(arch_);
    const int k = arch_.latent_size;
    const int w = arch_.head_residual_width;
    const bool chained = arch_.variant == Variant::rndf;
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(k, batch);
    Eigen::MatrixXd df_next = Eigen::MatrixXd::Zero(w, batch);
    for (int h = arch_.n - 1; h >= 0; --h) {
      Eigen::MatrixXd dr = back(t.output(h), upstream.row(h));
      for (int j = static_cast<int>(arch_.head_regression_widths.size()) - 1; j >= 0; --j) dr = back(t.regression(h, j), dr);
      const Eigen::MatrixXd df = dr + df_next;
      const Eigen::MatrixXd da = df + back(t.residual(h), df);
      const Eigen::MatrixXd din = back(t.proj(h), da);
      dg += din.topRows(k);
      if (chained && h > 0) {
        df_next = din.bottomRows(w);
      } else {
        df_next.setZero();
      }
    }
    const Eigen::MatrixXd dskip = back(t.skip, dg);
    Eigen::MatrixXd dh = dskip.topRows(k);
    denc = dskip.bottomRows(dskip.rows() - k);
    for (int l = t.bottleneck; l >= 0; --l) dh = back(l, dh);
    denc += dh;
  }

  const int d = arch_.input_dim();
  Eigen::MatrixXd dx = denc.topRows(d);
  const std::vector<int> rows = encoded_rows(arch_);
  const int e = static_cast<int>(rows.size());
  int row = d;
  for (int l = 0; l < arch_.encoding_frequencies; ++l) {
    const double wl = std::ldexp(std::numbers::pi, l);
    for (int i = 0; i < e; ++i) {
      const auto& s = cache.encoded.row(row + i);
      const auto& c = cache.encoded.row(row + e + i);
      dx.row(rows[static_cast<std::size_t>(i)]).array() +=
          wl * (c.array() * denc.row(row + i).array() - s.array() * denc.row(row + e + i).array());
    }
    row += 2 * e;
  }
  if (arch_.input_scale.size() > 0) dx.array().colwise() *= arch_.input_scale.array();
  return dx;
}

JacobianResult NeuralField::input_jacobian(const Eigen::VectorXd& q, const Eigen::Vector3d& p) const {
  if (q.size() != arch_.m) throw DimensionMismatch("configuration has wrong length");
  Eigen::VectorXd x(arch_.m + 3);
  x << q, p;
  const Eigen::MatrixXd xb = x.replicate(1, arch_.n);
  ForwardCache cache;
  forward_batch(xb, cache);
  const Eigen::MatrixXd dx = backward(cache, Eigen::MatrixXd::Identity(arch_.n, arch_.n), nullptr);
  JacobianResult j;
  j.dd_dq = dx.topRows(arch_.m).transpose();
  j.dd_dp = dx.bottomRows(3).transpose();
  return j;
}

Eigen::MatrixXd NeuralField::vjp(const Eigen::VectorXd& q, const Eigen::Matrix3Xd& p, const Eigen::MatrixXd& weights,
                                 Eigen::MatrixXd* values) const {
  if (q.size() != arch_.m) throw DimensionMismatch("configuration has wrong length");
  Eigen::MatrixXd x(arch_.m + 3, p.cols());
  x.topRows(arch_.m) = q.replicate(1, p.cols());
  x.bottomRows(3) = p;
  ForwardCache cache;
  Eigen::MatrixXd out = forward_batch(x, cache);
  if (values) *values = std::move(out);
  return backward(cache, weights, nullptr);
}

Float32Field::Float32Field(const NeuralField& field)
    : arch_(field.arch_), layers_(field.layers_), params_(field.params_.cast<float>()) {}

Eigen::MatrixXf Float32Field::forward_batch(const Eigen::MatrixXf& x) const {
  if (x.rows() != arch_.input_dim()) throw DimensionMismatch("input batch must have m + 3 rows");
  return chunked(x, Net<float>{arch_, layers_, params_.data(), nullptr});
}

}  // namespace kinsdf
