#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "kinsdf/neural_field.hpp"

namespace kinsdf {

struct TrainingMetadata {
  std::string robot_name;
  std::uint64_t robot_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t seed = 0;
  std::uint32_t epochs_run = 0;
  double best_val_rmse = 0.0;  // meters
  /// Held-out close-partition RMSE when known (meters), else 0.
  double close_rmse = 0.0;
};

struct Checkpoint {
  NeuralField field;
  TrainingMetadata meta;
};

/// Versioned binary file: header (architecture, robot hash, metadata) then
/// the flat parameter block as 64-bit floats. Round trips bit-exactly.
void write_checkpoint(const std::filesystem::path& path, const NeuralField& field, const TrainingMetadata& meta);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace kinsdf
