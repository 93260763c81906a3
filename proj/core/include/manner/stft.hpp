#pragma once

#include <cstdint>
#include <vector>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// One STFT resolution with a periodic Hann window.
struct StftConfig {
  int fft_size = 512;
  int hop = 50;
  int window_length = 240;

  /// window_length <= fft_size, 0 < hop < window_length, fft_size even.
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

/// (512, 50, 240), (1024, 120, 600), (2048, 240, 1200).
std::vector<StftConfig> default_resolutions();

/// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / length).
std::vector<double> hann_window(int length);

/// Frames taken without centre padding: 1 + (T - window_length) / hop, or 0
/// when the signal is shorter than one window.
std::int64_t stft_frame_count(std::int64_t length, const StftConfig& cfg);

/// |DFT| of each Hann-windowed frame of signal [T], zero-padded to fft_size.
/// Returns [frames, fft_size/2 + 1]. Differentiable with respect to the
/// signal; the gradient at exactly-zero bins is taken as zero.
Tensor stft_magnitude(const Tensor& signal, const StftConfig& cfg);

}  // namespace MANNER_ABI_NS
}  // namespace manner
