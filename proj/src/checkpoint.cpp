#include "kinsdf/checkpoint.hpp"

#include <cstring>

#include "binary_io.hpp"
#include "kinsdf/errors.hpp"

namespace kinsdf {

namespace {

constexpr char kCheckpointMagic[8] = {'K', 'S', 'D', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_ints(BinaryWriter& w, const std::vector<int>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (int x : v) w.u32(static_cast<std::uint32_t>(x));
}

std::vector<int> read_ints(BinaryReader& r) {
  const std::uint32_t n = r.u32();
  if (n > 1024) throw ParseError("checkpoint: implausible layer list length");
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(r.u32());
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const NeuralField& field, const TrainingMetadata& meta) {
  const ArchConfig& a = field.arch();
  BinaryWriter w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(a.variant));
  w.u32(static_cast<std::uint32_t>(a.latent_size));
  w.u32(static_cast<std::uint32_t>(a.encoding_frequencies));
  w.u32(a.encode_q ? 1 : 0);
  w.u32(a.encode_p ? 1 : 0);
  write_ints(w, a.backbone_widths);
  w.u32(static_cast<std::uint32_t>(a.head_residual_width));
  write_ints(w, a.head_regression_widths);
  write_ints(w, a.plain_widths);
  w.u32(static_cast<std::uint32_t>(a.m));
  w.u32(static_cast<std::uint32_t>(a.n));
  w.u32(static_cast<std::uint32_t>(a.input_scale.size()));
  for (Eigen::Index i = 0; i < a.input_scale.size(); ++i) w.f64(a.input_offset[i]);
  for (Eigen::Index i = 0; i < a.input_scale.size(); ++i) w.f64(a.input_scale[i]);

  w.str(meta.robot_name);
  w.u64(meta.robot_hash);
  w.u64(meta.dataset_hash);
  w.u64(meta.seed);
  w.u32(meta.epochs_run);
  w.f64(meta.best_val_rmse);
  w.f64(meta.close_rmse);

  w.u64(field.parameter_count());
  for (Eigen::Index i = 0; i < field.params().size(); ++i) w.f64(field.params()[i]);
  w.save(path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(path);
  const std::string name = path.string();
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw ParseError(name + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw ParseError(name + ": unsupported checkpoint version " + std::to_string(version));

  ArchConfig a;
  const std::uint32_t variant = r.u32();
  if (variant > 2) throw ParseError(name + ": unknown variant code");
  a.variant = static_cast<Variant>(variant);
  a.latent_size = static_cast<int>(r.u32());
  a.encoding_frequencies = static_cast<int>(r.u32());
  a.encode_q = r.u32() != 0;
  a.encode_p = r.u32() != 0;
  a.backbone_widths = read_ints(r);
  a.head_residual_width = static_cast<int>(r.u32());
  a.head_regression_widths = read_ints(r);
  a.plain_widths = read_ints(r);
  a.m = static_cast<int>(r.u32());
  a.n = static_cast<int>(r.u32());
  const std::uint32_t norm = r.u32();
  if (norm > 4096) throw ParseError(name + ": implausible normalization length");
  a.input_offset.resize(norm);
  a.input_scale.resize(norm);
  for (std::uint32_t i = 0; i < norm; ++i) a.input_offset[i] = r.f64();
  for (std::uint32_t i = 0; i < norm; ++i) a.input_scale[i] = r.f64();

  TrainingMetadata meta;
  meta.robot_name = r.str();
  meta.robot_hash = r.u64();
  meta.dataset_hash = r.u64();
  meta.seed = r.u64();
  meta.epochs_run = r.u32();
  meta.best_val_rmse = r.f64();
  meta.close_rmse = r.f64();

  NeuralField field = [&] {
    try {
      return NeuralField(a);
    } catch (const InvalidArgument& e) {
      throw ParseError(name + ": invalid architecture: " + e.what());
    }
  }();
  const std::uint64_t count = r.u64();
  if (count != field.parameter_count()) throw ParseError(name + ": parameter count does not match the architecture");
  if (r.remaining() != count * 8) throw ParseError(name + ": truncated or oversized parameter block");
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = r.f64();
  field.set_params(params);
  return {std::move(field), meta};
}

}  // namespace kinsdf
