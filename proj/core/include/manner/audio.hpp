#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Sample rate required for training, evaluation and enhancement.
inline constexpr int kSampleRate = 16000;

struct AudioClip {
  std::vector<Scalar> samples;  // mono, nominally in [-1, 1]
  int sample_rate = kSampleRate;

  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct CorpusPair {
  std::string id;  // file name shared by the noisy and clean member
  AudioClip noisy;
  AudioClip clean;
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
/// Throws DataError for malformed headers, other encodings or more than one
/// channel.
AudioClip read_wav(const std::filesystem::path& path);

/// PCM16 output maps v to round(v * 32768) clamped to the int16 range, so
/// read_wav(write_wav(clip)) is exact for values that are multiples of 1/32768.
void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding = WavEncoding::kPcm16);

/// Throws DataError naming `what` unless the clip is non-empty and sampled at
/// `expected` Hz.
void require_sample_rate(const AudioClip& clip, int expected, const std::string& what);

/// Number of windows of `window` samples starting at 0, hop, 2*hop, ...
/// needed to cover `length` samples.
std::int64_t segment_count(std::int64_t length, std::int64_t window, std::int64_t hop);

/// Fixed-length windows; the last one is zero-padded when it runs past the
/// end. Requires window > hop > 0.
std::vector<std::vector<Scalar>> segment(std::span<const Scalar> samples, std::int64_t window, std::int64_t hop);
std::vector<std::vector<Scalar>> segment(const AudioClip& clip, double window_seconds = 4.0, double hop_seconds = 3.0);

inline constexpr double kMinTempo = 0.9;
inline constexpr double kMaxTempo = 1.1;

/// Output length of a tempo change: round(length / rate), halves away from zero.
std::int64_t tempo_length(std::int64_t length, double rate);

/// Speed change by linear-interpolation resampling: output sample j reads the
/// input at position j * rate. Pitch moves with tempo. rate == 1 is the
/// identity. Throws ConfigError when rate is outside [kMinTempo, kMaxTempo].
AudioClip tempo_perturb(const AudioClip& clip, double rate);

/// Rate drawn uniformly from [kMinTempo, kMaxTempo] by a generator seeded with `seed`.
double draw_tempo_rate(std::uint64_t seed);

/// Applies one seeded rate to both members so they stay sample-aligned.
std::pair<AudioClip, AudioClip> tempo_perturb_pair(const AudioClip& noisy, const AudioClip& clean,
                                                   std::uint64_t seed);

/// Pairs `*.wav` files present in both directories by file name, sorted by
/// name. Files found in only one directory are reported through `warnings`
/// (or stderr when null) and skipped. Throws DataError when a pair differs
/// in length or sample rate, or when no names match.
std::vector<CorpusPair> pair_corpus(const std::filesystem::path& noisy_dir, const std::filesystem::path& clean_dir,
                                    std::vector<std::string>* warnings = nullptr);

/// Sorted `*.wav` files in `dir`; `dir` may also be a single file.
std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir);

}  // namespace MANNER_ABI_NS
}  // namespace manner
