#include "manner/stft.hpp"

#include <fftw3.h>

#include "branch_trace.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "manner/autograd.hpp"
#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

template <class T>
struct Fftw;

template <>
struct Fftw<float> {
  using Complex = fftwf_complex;
  using Plan = fftwf_plan;
  static void* malloc(std::size_t n) { return fftwf_malloc(n); }
  static void free(void* p) { fftwf_free(p); }
  static Plan r2c(int n, float* in, Complex* out) { return fftwf_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE); }
  static Plan c2r(int n, Complex* in, float* out) { return fftwf_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE); }
  static void exec_r2c(Plan p, float* in, Complex* out) { fftwf_execute_dft_r2c(p, in, out); }
  static void exec_c2r(Plan p, Complex* in, float* out) { fftwf_execute_dft_c2r(p, in, out); }
};

template <>
struct Fftw<double> {
  using Complex = fftw_complex;
  using Plan = fftw_plan;
  static void* malloc(std::size_t n) { return fftw_malloc(n); }
  static void free(void* p) { fftw_free(p); }
  static Plan r2c(int n, double* in, Complex* out) { return fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE); }
  static Plan c2r(int n, Complex* in, double* out) { return fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE); }
  static void exec_r2c(Plan p, double* in, Complex* out) { fftw_execute_dft_r2c(p, in, out); }
  static void exec_c2r(Plan p, Complex* in, double* out) { fftw_execute_dft_c2r(p, in, out); }
};

using F = Fftw<Scalar>;

template <class T>
struct FftwDeleter {
  void operator()(T* p) const { F::free(p); }
};

template <class T>
std::unique_ptr<T[], FftwDeleter<T>> fft_alloc(std::size_t n) {
  return std::unique_ptr<T[], FftwDeleter<T>>(static_cast<T*>(F::malloc(sizeof(T) * n)));
}

struct Plans {
  F::Plan forward;
  F::Plan inverse;
};

// FFTW planning is not thread-safe; execution with new arrays is.
const Plans& plans_for(int n) {
  static std::mutex mu;
  static std::map<int, Plans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto real = fft_alloc<Scalar>(n);
  auto spec = fft_alloc<F::Complex>(n / 2 + 1);
  Plans p{F::r2c(n, real.get(), spec.get()), F::c2r(n, spec.get(), real.get())};
  return cache.emplace(n, p).first->second;
}

}  // namespace

void StftConfig::validate() const {
  if (fft_size < 2 || fft_size % 2 != 0) throw ConfigError("stft: fft_size must be even and >= 2");
  if (window_length < 1 || window_length > fft_size) throw ConfigError("stft: window_length must be in [1, fft_size]");
  if (hop < 1 || hop >= window_length) throw ConfigError("stft: hop must be in [1, window_length)");
}

std::vector<StftConfig> default_resolutions() { return {{512, 50, 240}, {1024, 120, 600}, {2048, 240, 1200}}; }

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

std::int64_t stft_frame_count(std::int64_t length, const StftConfig& cfg) {
  if (length < cfg.window_length) return 0;
  return 1 + (length - cfg.window_length) / cfg.hop;
}

Tensor stft_magnitude(const Tensor& signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.rank() != 1) throw ShapeError("stft: expected a 1-D signal, got " + to_string(signal.shape()));
  const std::int64_t length = signal.size(0);
  const std::int64_t frames = stft_frame_count(length, cfg);
  if (frames < 1) {
    throw ShapeError("stft: signal of " + std::to_string(length) + " samples is shorter than the window (" +
                     std::to_string(cfg.window_length) + ")");
  }
  const int n = cfg.fft_size;
  const int bins = n / 2 + 1;
  const int win = cfg.window_length;
  const int hop = cfg.hop;
  const auto window = hann_window(win);
  const Plans& plans = plans_for(n);

  Tensor out({frames, bins});
  auto mag = out.mutable_data();
  // Complex spectra are kept for the backward pass.
  auto spectra = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(frames * bins * 2));
  auto in = fft_alloc<Scalar>(n);
  auto spec = fft_alloc<F::Complex>(bins);
  const auto xs = signal.data();
  for (std::int64_t f = 0; f < frames; ++f) {
    const Scalar* frame = xs.data() + f * hop;
    for (int i = 0; i < win; ++i) in[i] = static_cast<Scalar>(frame[i] * window[i]);
    for (int i = win; i < n; ++i) in[i] = 0;
    F::exec_r2c(plans.forward, in.get(), spec.get());
    for (int k = 0; k < bins; ++k) {
      const Scalar re = spec[k][0], im = spec[k][1];
      (*spectra)[(f * bins + k) * 2] = re;
      (*spectra)[(f * bins + k) * 2 + 1] = im;
      mag[f * bins + k] = std::sqrt(re * re + im * im);
    }
    if (branch_trace::enabled()) {
      // The DC and Nyquist bins are real, so their magnitude is |re|.
      branch_trace::note(spec[0][0] > 0);
      branch_trace::note(spec[bins - 1][0] > 0);
    }
  }

  if (detail::should_record({&signal})) {
    auto si = signal.impl(), oi = out.impl();
    detail::record(out, [si, oi, spectra, window, frames, bins, n, win, hop, &plans] {
      auto& gs = detail::grad_buffer(*si);
      auto zbuf = fft_alloc<F::Complex>(bins);
      auto frame_grad = fft_alloc<Scalar>(n);
      for (std::int64_t f = 0; f < frames; ++f) {
        // d|X_k|/ds_n = Re(conj(u_k) e^{-i w_k n}) with u = X/|X|, so the frame
        // gradient is Re(sum_k g_k u_k e^{+i w_k n}) over the one-sided bins.
        // The Hermitian c2r transform doubles interior bins, hence the 0.5.
        for (int k = 0; k < bins; ++k) {
          const Scalar m = oi->data[f * bins + k];
          const Scalar g = oi->grad[f * bins + k];
          Scalar re = 0, im = 0;
          if (m > 0) {
            re = g * (*spectra)[(f * bins + k) * 2] / m;
            im = g * (*spectra)[(f * bins + k) * 2 + 1] / m;
          }
          const Scalar w = (k == 0 || k == n / 2) ? Scalar{1} : Scalar{0.5};
          zbuf[k][0] = re * w;
          zbuf[k][1] = im * w;
        }
        // c2r ignores the imaginary parts of the DC and Nyquist bins, which is
        // exactly the Re() above.
        F::exec_c2r(plans.inverse, zbuf.get(), frame_grad.get());
        Scalar* dst = gs.data() + f * hop;
        for (int i = 0; i < win; ++i) dst[i] += static_cast<Scalar>(frame_grad[i] * window[i]);
      }
    });
  }
  return out;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
