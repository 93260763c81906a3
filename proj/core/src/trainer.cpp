#include "manner/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "manner/autograd.hpp"
#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix(mix(mix(seed) ^ a) ^ b);
}

std::int64_t samples_for(double seconds) { return std::llround(seconds * kSampleRate); }

Tensor column(const std::vector<Scalar>& samples) {
  return Tensor({1, 1, static_cast<std::int64_t>(samples.size())}, samples);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(segment_seconds > segment_hop_seconds && segment_hop_seconds > 0)) {
    throw ConfigError("train: require segment_seconds > segment_hop_seconds > 0");
  }
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  if (validate_every < 1) throw ConfigError("train.validate_every must be >= 1");
  ScheduleConfig{lr_min, lr_max, 2, warmup_fraction}.validate();
  if (loss.resolutions.empty()) throw ConfigError("loss: at least one STFT resolution is required");
  for (const auto& r : loss.resolutions) r.validate();
}

EpochPlan plan_epoch(const std::vector<CorpusPair>& corpus, const TrainConfig& cfg, std::int64_t epoch) {
  const std::int64_t window = samples_for(cfg.segment_seconds);
  const std::int64_t hop = samples_for(cfg.segment_hop_seconds);
  std::vector<SegmentRef> refs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double rate = cfg.tempo_augment ? draw_tempo_rate(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), i))
                                          : 1.0;
    const auto length = tempo_length(static_cast<std::int64_t>(corpus[i].noisy.samples.size()), rate);
    const auto count = segment_count(length, window, hop);
    for (std::int64_t s = 0; s < count; ++s) {
      refs.push_back(SegmentRef{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(s), rate});
    }
  }
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), ~0ULL));
  std::shuffle(refs.begin(), refs.end(), rng);

  EpochPlan plan;
  for (std::size_t b = 0; b < refs.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
    const auto end = std::min(refs.size(), b + static_cast<std::size_t>(cfg.batch_size));
    plan.batches.emplace_back(refs.begin() + static_cast<std::ptrdiff_t>(b), refs.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

Batch make_batch(const std::vector<CorpusPair>& corpus, const std::vector<SegmentRef>& refs, const TrainConfig& cfg) {
  const std::int64_t window = samples_for(cfg.segment_seconds);
  const std::int64_t hop = samples_for(cfg.segment_hop_seconds);
  const auto batch = static_cast<std::int64_t>(refs.size());
  Tensor noisy({batch, 1, window}), clean({batch, 1, window});
  auto nd = noisy.mutable_data(), cd = clean.mutable_data();
  for (std::int64_t b = 0; b < batch; ++b) {
    const SegmentRef& ref = refs[b];
    const CorpusPair& pair = corpus.at(ref.pair);
    const AudioClip x = ref.rate == 1.0 ? pair.noisy : tempo_perturb(pair.noisy, ref.rate);
    const AudioClip y = ref.rate == 1.0 ? pair.clean : tempo_perturb(pair.clean, ref.rate);
    const std::int64_t start = static_cast<std::int64_t>(ref.index) * hop;
    const auto length = static_cast<std::int64_t>(x.samples.size());
    const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, window);
    std::copy_n(x.samples.begin() + start, n, nd.begin() + b * window);
    std::copy_n(y.samples.begin() + start, n, cd.begin() + b * window);
  }
  return {noisy, clean};
}

Trainer::Trainer(MannerModel& model, TrainConfig cfg)
    : model_(model), cfg_(std::move(cfg)), adam_(model.parameters().trainable(), cfg_.adam) {
  cfg_.validate();
}

LossReport Trainer::step(const Batch& batch, double lr) {
  Tape tape;
  LossReport report;
  {
    TapeScope scope(tape);
    const Tensor estimate = model_.forward(batch.noisy, /*training=*/true);
    report = batch_loss(batch.noisy, batch.clean, estimate, cfg_.loss);
  }
  const double total = report.total.item();
  if (!std::isfinite(total)) {
    throw DivergenceError("non-finite loss at step " + std::to_string(state_.step + 1) + ": " +
                          format_loss_line(state_.step + 1, state_.epoch + 1, lr, report));
  }
  model_.parameters().zero_grad();
  backward(tape, report.total);
  tape.clear();
  adam_.step(lr);
  return report;
}

double Trainer::validate(const std::vector<CorpusPair>& corpus) const {
  if (corpus.empty()) throw DataError("validation corpus is empty");
  double sum = 0;
  for (const auto& pair : corpus) {
    const Tensor noisy = column(pair.noisy.samples);
    const Tensor clean = column(pair.clean.samples);
    const Tensor estimate = model_.forward(noisy, /*training=*/false);
    const auto length = static_cast<std::int64_t>(pair.noisy.samples.size());
    const LossReport r = weighted_total_loss(reshape(noisy, {length}), reshape(clean, {length}),
                                             reshape(estimate, {length}), cfg_.loss);
    sum += r.total.item();
  }
  return sum / static_cast<double>(corpus.size());
}

double Trainer::learning_rate(std::int64_t step, const std::vector<std::int64_t>& batches_per_epoch) const {
  ScheduleConfig schedule{cfg_.lr_min, cfg_.lr_max, 2, cfg_.warmup_fraction};
  std::int64_t position = step;
  if (cfg_.cycle_per_epoch) {
    for (auto n : batches_per_epoch) {
      if (position < n) {
        schedule.total_steps = std::max<std::int64_t>(n, 2);
        break;
      }
      position -= n;
    }
  } else {
    std::int64_t total = std::accumulate(batches_per_epoch.begin(), batches_per_epoch.end(), std::int64_t{0});
    if (cfg_.max_steps > 0) total = std::min(total, cfg_.max_steps);
    schedule.total_steps = std::max<std::int64_t>(total, 2);
  }
  return onecycle_lr(std::clamp<std::int64_t>(position, 0, schedule.total_steps), schedule);
}

TrainResult Trainer::fit(const std::vector<CorpusPair>& train, const std::vector<CorpusPair>& valid,
                         const TrainOutputs& outputs) {
  if (train.empty()) throw DataError("training corpus is empty");
  for (const auto& p : train) {
    require_sample_rate(p.noisy, kSampleRate, "training utterance " + p.id);
    require_sample_rate(p.clean, kSampleRate, "training utterance " + p.id);
  }
  for (const auto& p : valid) {
    require_sample_rate(p.noisy, kSampleRate, "validation utterance " + p.id);
    require_sample_rate(p.clean, kSampleRate, "validation utterance " + p.id);
  }
  const auto& valid_set = valid.empty() ? train : valid;

  std::vector<EpochPlan> plans;
  std::vector<std::int64_t> batches_per_epoch;
  for (int e = 0; e < cfg_.epochs; ++e) {
    plans.push_back(plan_epoch(train, cfg_, e));
    batches_per_epoch.push_back(static_cast<std::int64_t>(plans.back().batches.size()));
  }

  TrainResult result;
  bool validated_now = false;
  const auto run_validation = [&](std::int64_t epoch) {
    const double v = validate(valid_set);
    result.validation_losses.push_back(v);
    result.final_validation = v;
    validated_now = true;
    if (outputs.log) *outputs.log << "valid epoch=" << epoch << " step=" << state_.step << " loss=" << v << '\n';
    if (v < state_.best_validation) {
      state_.best_validation = v;
      state_.best_epoch = epoch;
      if (!outputs.best_checkpoint.empty()) save(outputs.best_checkpoint);
    }
  };

  std::int64_t epoch_start = 0;
  for (std::int64_t e = 0; e < state_.epoch && e < cfg_.epochs; ++e) epoch_start += batches_per_epoch[e];
  bool stopped = false;
  bool halted = false;
  for (std::int64_t e = state_.epoch; e < cfg_.epochs && !stopped; ++e) {
    const auto& batches = plans[e].batches;
    for (std::int64_t b = state_.step - epoch_start; b < static_cast<std::int64_t>(batches.size()); ++b) {
      if (cfg_.max_steps > 0 && state_.step >= cfg_.max_steps) {
        stopped = true;
        break;
      }
      if (outputs.halt_at_step > 0 && state_.step >= outputs.halt_at_step) {
        stopped = halted = true;
        break;
      }
      const double lr = learning_rate(state_.step, batches_per_epoch);
      const LossReport report = step(make_batch(train, batches[b], cfg_), lr);
      ++state_.step;
      validated_now = false;
      result.step_losses.push_back(report.total.item());
      if (outputs.log) *outputs.log << format_loss_line(state_.step, e + 1, lr, report) << '\n';
    }
    if (stopped) break;
    epoch_start += static_cast<std::int64_t>(batches.size());
    state_.epoch = e + 1;
    if (state_.epoch % cfg_.validate_every == 0 || state_.epoch == cfg_.epochs) run_validation(state_.epoch);
  }
  if (!validated_now && !halted) run_validation(state_.epoch);
  if (!outputs.last_checkpoint.empty()) save(outputs.last_checkpoint);
  if (outputs.log) outputs.log->flush();
  result.state = state_;
  return result;
}

void Trainer::save(const std::filesystem::path& path) const { save_checkpoint(path, model_, &adam_, state_); }

void Trainer::load(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  apply_checkpoint(ckpt, model_, &adam_, &state_);
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
