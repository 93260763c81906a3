#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "manner/model.hpp"
#include "manner/optimizer.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trainer progress saved alongside the weights.
struct TrainerState {
  std::int64_t step = 0;  // optimizer steps taken
  std::int64_t epoch = 0;  // epochs completed
  double best_validation = std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = -1;
};

enum class TensorKind : std::uint8_t { kParameter = 0, kBuffer = 1, kAdamFirst = 2, kAdamSecond = 3 };

struct CheckpointTensor {
  std::string name;
  TensorKind kind;
  Shape shape;
  std::vector<double> values;
};

/// Decoded file contents. Nothing is applied until apply_checkpoint().
struct Checkpoint {
  ModelConfig config;
  TrainerState trainer;
  std::int64_t adam_steps = 0;
  std::vector<CheckpointTensor> tensors;
};

/// Writes model state, optionally optimizer moments, and trainer progress.
/// The file is written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const MannerModel& model, const Adam* adam = nullptr,
                     const TrainerState& trainer = {});

/// Reads and validates a whole file. Throws CheckpointError on bad magic,
/// unknown version, truncation or malformed records.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies stored tensors into `model` (and `adam` when given). Every name
/// and shape is checked before anything is written, so a mismatch leaves the
/// targets untouched.
void apply_checkpoint(const Checkpoint& ckpt, MannerModel& model, Adam* adam = nullptr,
                      TrainerState* trainer = nullptr);

/// Builds a model from the stored configuration and loads its weights.
MannerModel load_model(const std::filesystem::path& path);

}  // namespace MANNER_ABI_NS
}  // namespace manner
