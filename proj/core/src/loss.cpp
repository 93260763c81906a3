#include "manner/loss.hpp"

#include <cmath>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

#include "manner/errors.hpp"
#include "manner/ops.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

void warn_skipped(const StftConfig& cfg, std::int64_t length) {
  static std::mutex mu;
  static std::set<std::tuple<int, int, int>> warned;
  std::lock_guard<std::mutex> lock(mu);
  if (warned.insert({cfg.fft_size, cfg.hop, cfg.window_length}).second) {
    std::cerr << "warning: skipping STFT resolution (fft=" << cfg.fft_size << ", hop=" << cfg.hop
              << ", win=" << cfg.window_length << ") for a " << length << "-sample signal\n";
  }
}

void require_matching(const Tensor& a, const Tensor& b, const char* who) {
  if (a.rank() != 1 || a.shape() != b.shape()) {
    throw ShapeError(std::string(who) + ": expected two 1-D signals of equal length, got " + to_string(a.shape()) +
                     " and " + to_string(b.shape()));
  }
}

}  // namespace

StftLossTerms stft_loss(const Tensor& target, const Tensor& estimate, const StftConfig& cfg, Scalar log_floor) {
  require_matching(target, estimate, "stft_loss");
  const Tensor y = stft_magnitude(target, cfg);
  const Tensor y_hat = stft_magnitude(estimate, cfg);
  const Tensor numerator = sqrt(sum(square(sub(y, y_hat))));
  const Tensor denominator = sqrt(add_scalar(sum(square(y)), Scalar(1e-20)));
  return StftLossTerms{div(numerator, denominator),
                       mean(abs(sub(log_clamped(y, log_floor), log_clamped(y_hat, log_floor))))};
}

Tensor multires_stft_loss(const Tensor& target, const Tensor& estimate, const std::vector<StftConfig>& configs,
                          Scalar log_floor, CombinedTerms* terms) {
  if (configs.empty()) throw ConfigError("multi-resolution STFT loss needs at least one resolution");
  require_matching(target, estimate, "multires_stft_loss");
  Tensor total;
  int used = 0;
  for (const auto& cfg : configs) {
    ResolutionTerms r;
    if (stft_frame_count(target.size(0), cfg) < 1) {
      warn_skipped(cfg, target.size(0));
      r.skipped = true;
    } else {
      auto t = stft_loss(target, estimate, cfg, log_floor);
      r.spectral_convergence = t.spectral_convergence.item();
      r.magnitude = t.magnitude.item();
      const Tensor term = add(t.spectral_convergence, t.magnitude);
      total = total.defined() ? add(total, term) : term;
      ++used;
    }
    if (terms) terms->resolutions.push_back(r);
  }
  if (used == 0) return Tensor::scalar(0);
  return scale(total, Scalar(1) / static_cast<Scalar>(used));
}

Tensor combined_loss(const Tensor& target, const Tensor& estimate, const LossOptions& options,
                     CombinedTerms* terms) {
  require_matching(target, estimate, "combined_loss");
  const Tensor l1 = mean(abs(sub(target, estimate)));
  if (terms) terms->l1 = l1.item();
  return add(l1, multires_stft_loss(target, estimate, options.resolutions, options.log_floor, terms));
}

double clean_weight(std::span<const Scalar> clean, std::span<const Scalar> noise) {
  double ey = 0, en = 0;
  for (auto v : clean) ey += static_cast<double>(v) * v;
  for (auto v : noise) en += static_cast<double>(v) * v;
  if (ey + en == 0) return 0.5;
  return ey / (ey + en);
}

LossReport weighted_total_loss(const Tensor& noisy, const Tensor& clean, const Tensor& estimate,
                               const LossOptions& options) {
  require_matching(noisy, clean, "weighted_total_loss");
  require_matching(noisy, estimate, "weighted_total_loss");
  LossReport report;
  if (!options.weighted) {
    report.alpha = 1;
    report.total = combined_loss(clean, estimate, options, &report.clean);
    return report;
  }
  const Tensor noise = sub(noisy, clean);
  report.alpha = clean_weight(clean.data(), noise.data());
  const auto alpha = static_cast<Scalar>(report.alpha);
  // Written so that a NaN weight (non-finite input) evaluates both branches
  // and the non-finite total reaches the caller.
  Tensor total;
  if (!(report.alpha <= 0)) total = scale(combined_loss(clean, estimate, options, &report.clean), alpha);
  if (!(report.alpha >= 1)) {
    const Tensor noise_estimate = sub(noisy, estimate);
    const Tensor noise_term = scale(combined_loss(noise, noise_estimate, options, &report.noise), Scalar(1) - alpha);
    total = total.defined() ? add(total, noise_term) : noise_term;
  }
  report.total = total;
  return report;
}

namespace {

void accumulate(CombinedTerms& into, const CombinedTerms& from, double w) {
  into.l1 += w * from.l1;
  if (into.resolutions.size() < from.resolutions.size()) into.resolutions.resize(from.resolutions.size());
  for (std::size_t r = 0; r < from.resolutions.size(); ++r) {
    into.resolutions[r].spectral_convergence += w * from.resolutions[r].spectral_convergence;
    into.resolutions[r].magnitude += w * from.resolutions[r].magnitude;
    into.resolutions[r].skipped = from.resolutions[r].skipped;
  }
}

}  // namespace

LossReport batch_loss(const Tensor& noisy, const Tensor& clean, const Tensor& estimate, const LossOptions& options) {
  if (noisy.rank() != 3 || noisy.size(1) != 1 || noisy.shape() != clean.shape() || noisy.shape() != estimate.shape()) {
    throw ShapeError("batch_loss: expected three [B,1,T] tensors of equal shape");
  }
  const std::int64_t batch = noisy.size(0), length = noisy.size(2);
  const double w = 1.0 / static_cast<double>(batch);
  LossReport report;
  report.alpha = 0;
  Tensor total;
  for (std::int64_t b = 0; b < batch; ++b) {
    auto row = [&](const Tensor& t) { return reshape(slice(t, 0, b, 1), {length}); };
    LossReport one = weighted_total_loss(row(noisy), row(clean), row(estimate), options);
    total = total.defined() ? add(total, one.total) : one.total;
    report.alpha += w * one.alpha;
    accumulate(report.clean, one.clean, w);
    accumulate(report.noise, one.noise, w);
  }
  report.total = scale(total, static_cast<Scalar>(w));
  return report;
}

std::string format_loss_line(std::int64_t step, std::int64_t epoch, double lr, const LossReport& report) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "step=" << step << " epoch=" << epoch << " lr=" << lr << " total=" << report.total.item()
     << " alpha=" << report.alpha << " l1=" << report.clean.l1;
  for (std::size_t r = 0; r < report.clean.resolutions.size(); ++r) {
    os << " sc" << r << '=' << report.clean.resolutions[r].spectral_convergence << " mag" << r << '='
       << report.clean.resolutions[r].magnitude;
  }
  if (!report.noise.resolutions.empty()) {
    os << " noise_l1=" << report.noise.l1;
    for (std::size_t r = 0; r < report.noise.resolutions.size(); ++r) {
      os << " noise_sc" << r << '=' << report.noise.resolutions[r].spectral_convergence << " noise_mag" << r << '='
         << report.noise.resolutions[r].magnitude;
    }
  }
  return os.str();
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
