#include "manner/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

double si_snr(std::span<const Scalar> reference, std::span<const Scalar> estimate) {
  if (reference.size() != estimate.size() || reference.empty()) {
    throw ShapeError("si_snr: signals must be non-empty and of equal length");
  }
  const auto n = reference.size();
  double mean_r = 0, mean_e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_r += reference[i];
    mean_e += estimate[i];
  }
  mean_r /= static_cast<double>(n);
  mean_e /= static_cast<double>(n);

  double dot = 0, energy_r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = reference[i] - mean_r;
    dot += r * (estimate[i] - mean_e);
    energy_r += r * r;
  }
  if (energy_r == 0) return -kSiSnrCeiling;
  const double gain = dot / energy_r;
  double target = 0, residual = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = gain * (reference[i] - mean_r);
    const double e = (estimate[i] - mean_e) - s;
    target += s * s;
    residual += e * e;
  }
  if (target == 0) return -kSiSnrCeiling;
  if (residual == 0) return kSiSnrCeiling;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSnrCeiling, kSiSnrCeiling);
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
