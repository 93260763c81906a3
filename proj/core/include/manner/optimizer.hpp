#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a single tensor. `step` is the 1-based
/// index of this update. Throws ShapeError when the spans differ in length.
void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, std::span<Scalar> m, std::span<Scalar> v,
                 std::int64_t step, double lr, const AdamConfig& cfg);

/// Adam over a fixed list of parameters, reading their accumulated gradients.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  void step(double lr);
  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& parameters() const { return params_; }

  // Moment tensors, one per parameter in the same order. Exposed for
  // checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(std::int64_t steps) { steps_ = steps; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

struct ScheduleConfig {
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  std::int64_t total_steps = 1;
  double warmup_fraction = 0.3;

  /// lr_min < lr_max, 0 < warmup_fraction < 1, total_steps >= 2.
  void validate() const;
  /// Step at which the peak is reached: round(warmup_fraction * total_steps),
  /// kept inside [1, total_steps - 1].
  std::int64_t warmup_steps() const;
};

/// One-cycle schedule: cosine ramp lr_min -> lr_max over the warmup steps,
/// then cosine anneal back to lr_min at total_steps. Both ends return lr_min
/// and the peak returns lr_max exactly. Throws ConfigError for steps outside
/// [0, total_steps].
double onecycle_lr(std::int64_t step, const ScheduleConfig& cfg);

}  // namespace MANNER_ABI_NS
}  // namespace manner
