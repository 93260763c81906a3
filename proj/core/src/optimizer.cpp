#include "manner/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, std::span<Scalar> m, std::span<Scalar> v,
                 std::int64_t step, double lr, const AdamConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  }
  if (step < 1) throw Error("adam_update: step index must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<Scalar>(mi);
    v[i] = static_cast<Scalar>(vi);
    param[i] -= static_cast<Scalar>(lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step(double lr) {
  ++steps_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_update(params_[i].mutable_data(), params_[i].grad(), m_[i].mutable_data(), v_[i].mutable_data(), steps_, lr,
                cfg_);
  }
}

void ScheduleConfig::validate() const {
  if (!(lr_min > 0 && lr_min < lr_max)) throw ConfigError("schedule: require 0 < lr_min < lr_max");
  if (!(warmup_fraction > 0 && warmup_fraction < 1)) throw ConfigError("schedule: warmup_fraction must be in (0, 1)");
  if (total_steps < 2) throw ConfigError("schedule: total_steps must be at least 2");
}

std::int64_t ScheduleConfig::warmup_steps() const {
  const auto w = std::llround(warmup_fraction * static_cast<double>(total_steps));
  return std::clamp<std::int64_t>(w, 1, total_steps - 1);
}

double onecycle_lr(std::int64_t step, const ScheduleConfig& cfg) {
  cfg.validate();
  if (step < 0 || step > cfg.total_steps) {
    throw ConfigError("onecycle_lr: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(cfg.total_steps) + "]");
  }
  const std::int64_t warm = cfg.warmup_steps();
  // w is the weight of lr_max: 0 at both ends, 1 at the peak.
  double w;
  if (step <= warm) {
    w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(warm)));
  } else {
    const double t = static_cast<double>(step - warm) / static_cast<double>(cfg.total_steps - warm);
    w = 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }
  if (step == 0 || step == cfg.total_steps) return cfg.lr_min;
  if (step == warm) return cfg.lr_max;
  return cfg.lr_max * w + cfg.lr_min * (1.0 - w);
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
