#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "manner/stft.hpp"
#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

struct LossOptions {
  std::vector<StftConfig> resolutions = default_resolutions();
  /// Clamp applied to magnitudes before the log.
  Scalar log_floor = Scalar(1e-8);
  /// Clean/noise weighting; when false the total is loss(y, y_hat) alone.
  bool weighted = true;
};

struct StftLossTerms {
  Tensor spectral_convergence;  // ||Y - Y_hat||_F / ||Y||_F
  Tensor magnitude;             // mean |log Y - log Y_hat|
};

/// Single-resolution STFT loss between 1-D signals of equal length.
StftLossTerms stft_loss(const Tensor& target, const Tensor& estimate, const StftConfig& cfg,
                        Scalar log_floor = Scalar(1e-8));

struct ResolutionTerms {
  double spectral_convergence = 0;
  double magnitude = 0;
  bool skipped = false;  // signal shorter than the window
};

struct CombinedTerms {
  double l1 = 0;
  std::vector<ResolutionTerms> resolutions;
};

/// Mean over resolutions of (spectral convergence + log magnitude).
/// Resolutions whose window exceeds the signal are skipped with a warning;
/// throws when `configs` is empty.
Tensor multires_stft_loss(const Tensor& target, const Tensor& estimate, const std::vector<StftConfig>& configs,
                          Scalar log_floor = Scalar(1e-8), CombinedTerms* terms = nullptr);

/// mean|y - y_hat| + multires_stft_loss(y, y_hat).
Tensor combined_loss(const Tensor& target, const Tensor& estimate, const LossOptions& options,
                     CombinedTerms* terms = nullptr);

/// Energy ratio ||y||^2 / (||y||^2 + ||n||^2); 0.5 when both are zero.
double clean_weight(std::span<const Scalar> clean, std::span<const Scalar> noise);

struct LossReport {
  Tensor total;
  double alpha = 1;
  CombinedTerms clean;  // loss(y, y_hat)
  CombinedTerms noise;  // loss(n, n_hat), empty when unweighted or alpha == 1
};

/// alpha * loss(y, y_hat) + (1 - alpha) * loss(n, n_hat) with n = x - y and
/// n_hat = x - y_hat, for 1-D signals. A branch whose weight is exactly zero
/// is not evaluated.
LossReport weighted_total_loss(const Tensor& noisy, const Tensor& clean, const Tensor& estimate,
                               const LossOptions& options = {});

/// Batched form over [B,1,T] tensors: alpha per example, mean over the batch.
/// The reported terms are batch means.
LossReport batch_loss(const Tensor& noisy, const Tensor& clean, const Tensor& estimate,
                      const LossOptions& options = {});

/// One structured log line: "step=.. epoch=.. lr=.. total=.. alpha=.. l1=.. sc0=.. mag0=.. ...".
std::string format_loss_line(std::int64_t step, std::int64_t epoch, double lr, const LossReport& report);

}  // namespace MANNER_ABI_NS
}  // namespace manner
