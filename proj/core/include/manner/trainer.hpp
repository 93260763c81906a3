#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "manner/audio.hpp"
#include "manner/checkpoint.hpp"
#include "manner/loss.hpp"
#include "manner/model.hpp"
#include "manner/optimizer.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 4;
  std::uint64_t seed = 0;
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  double warmup_fraction = 0.3;
  /// Restart the one-cycle schedule every epoch instead of spanning the run.
  bool cycle_per_epoch = false;
  double segment_seconds = 4.0;
  double segment_hop_seconds = 3.0;
  bool tempo_augment = true;
  /// Stop after this many optimizer steps in total; 0 means no limit.
  std::int64_t max_steps = 0;
  /// Validate every this many epochs (the final epoch is always validated).
  int validate_every = 1;
  AdamConfig adam;
  LossOptions loss;

  void validate() const;
};

/// One training example: a segment index into a fixed corpus.
struct SegmentRef {
  std::uint32_t pair = 0;
  std::uint32_t index = 0;  // window number within the (augmented) utterance
  double rate = 1.0;        // tempo applied to the utterance this epoch
};

/// The batches of one epoch, fully determined by (seed, epoch).
struct EpochPlan {
  std::vector<std::vector<SegmentRef>> batches;
};

EpochPlan plan_epoch(const std::vector<CorpusPair>& corpus, const TrainConfig& cfg, std::int64_t epoch);

struct Batch {
  Tensor noisy;  // [B,1,W]
  Tensor clean;  // [B,1,W]
};

/// Materializes the segments of a planned batch.
Batch make_batch(const std::vector<CorpusPair>& corpus, const std::vector<SegmentRef>& refs, const TrainConfig& cfg);

struct TrainResult {
  TrainerState state;
  std::vector<double> step_losses;       // total loss of every step taken in this call
  std::vector<double> validation_losses;  // one per validated epoch
  double final_validation = 0;
};

/// Output locations; empty paths are not written.
struct TrainOutputs {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::ostream* log = nullptr;  // one loss line per step plus validation lines
  /// Interrupt after this global step (0 = never). The schedule is not
  /// affected, so a later fit() from the last checkpoint continues the same
  /// run. An interrupted call skips the final validation.
  std::int64_t halt_at_step = 0;
};

/// Owns the optimizer and progress counters for one model. Single-threaded
/// training with a fixed seed is bit-reproducible, including across a
/// save/resume boundary.
class Trainer {
 public:
  Trainer(MannerModel& model, TrainConfig cfg);

  /// Forward, loss, backward and one Adam update at learning rate `lr`.
  /// Throws DivergenceError when the loss is not finite.
  LossReport step(const Batch& batch, double lr);

  /// Mean weighted loss over whole utterances in evaluation mode.
  double validate(const std::vector<CorpusPair>& corpus) const;

  /// Runs (or continues) training until the configured epochs or max_steps
  /// are exhausted. When `valid` is empty the training corpus is used for
  /// validation.
  TrainResult fit(const std::vector<CorpusPair>& train, const std::vector<CorpusPair>& valid,
                  const TrainOutputs& outputs = {});

  /// Learning rate for global step `step` given the run's epoch plans.
  double learning_rate(std::int64_t step, const std::vector<std::int64_t>& batches_per_epoch) const;

  void save(const std::filesystem::path& path) const;
  /// Restores weights, optimizer moments and progress from `path`.
  void load(const std::filesystem::path& path);

  const TrainerState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  const Adam& optimizer() const { return adam_; }

 private:
  MannerModel& model_;
  TrainConfig cfg_;
  Adam adam_;
  TrainerState state_;
};

}  // namespace MANNER_ABI_NS
}  // namespace manner
