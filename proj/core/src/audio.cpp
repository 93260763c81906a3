#include "manner/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <random>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace fs = std::filesystem;
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

AudioClip read_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) { return DataError(path.string() + ": " + why); };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      // Some writers leave the data size unset; accept a trailing data chunk.
      if (std::memcmp(chunk, "data", 4) != 0) throw fail("truncated chunk");
    }
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw fail("short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (available < 26) throw fail("short extensible fmt chunk");
        format = read_u16(f + 24);  // leading bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = available;
    }
    pos = body + available + (available & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (channels != 1) throw fail("expected mono audio, found " + std::to_string(channels) + " channels");
  if (rate == 0) throw fail("sample rate is zero");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    clip.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
      clip.samples[i] = static_cast<Scalar>(v / 32768.0);
    }
  } else if (format == kFormatFloat && bits == 32) {
    clip.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      clip.samples[i] = static_cast<Scalar>(std::bit_cast<float>(read_u32(data + 4 * i)));
    }
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
               " bits); expected 16-bit PCM or 32-bit float");
  }
  return clip;
}

void write_wav(const fs::path& path, const AudioClip& clip, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bytes_per_sample = pcm ? 2 : 4;
  const auto data_size = static_cast<std::uint32_t>(clip.samples.size() * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * bytes_per_sample);
  put_u16(out, bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
  out += "data";
  put_u32(out, data_size);
  for (Scalar v : clip.samples) {
    if (pcm) {
      const double q = std::clamp(std::round(static_cast<double>(v) * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("write failed: " + path.string());
}

void require_sample_rate(const AudioClip& clip, int expected, const std::string& what) {
  if (clip.sample_rate != expected) {
    throw DataError(what + ": sample rate " + std::to_string(clip.sample_rate) + " Hz, expected " +
                    std::to_string(expected) + " Hz");
  }
  if (clip.samples.empty()) throw DataError(what + ": no samples");
}

std::int64_t segment_count(std::int64_t length, std::int64_t window, std::int64_t hop) {
  if (!(window > hop && hop > 0)) throw ConfigError("segment: require window > hop > 0");
  if (length <= window) return 1;
  return (length - window + hop - 1) / hop + 1;
}

std::vector<std::vector<Scalar>> segment(std::span<const Scalar> samples, std::int64_t window, std::int64_t hop) {
  const auto length = static_cast<std::int64_t>(samples.size());
  const std::int64_t count = segment_count(length, window, hop);
  std::vector<std::vector<Scalar>> out(static_cast<std::size_t>(count), std::vector<Scalar>(window, Scalar(0)));
  for (std::int64_t s = 0; s < count; ++s) {
    const std::int64_t start = s * hop;
    const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, window);
    std::copy_n(samples.begin() + start, n, out[s].begin());
  }
  return out;
}

std::vector<std::vector<Scalar>> segment(const AudioClip& clip, double window_seconds, double hop_seconds) {
  return segment(clip.samples, std::llround(window_seconds * clip.sample_rate),
                 std::llround(hop_seconds * clip.sample_rate));
}

std::int64_t tempo_length(std::int64_t length, double rate) {
  return std::llround(static_cast<double>(length) / rate);
}

AudioClip tempo_perturb(const AudioClip& clip, double rate) {
  if (!(rate >= kMinTempo && rate <= kMaxTempo)) {
    throw ConfigError("tempo rate " + std::to_string(rate) + " outside [0.9, 1.1]");
  }
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  const auto n = static_cast<std::int64_t>(clip.samples.size());
  if (n == 0) return out;
  const std::int64_t m = tempo_length(n, rate);
  out.samples.resize(m);
  for (std::int64_t j = 0; j < m; ++j) {
    const double position = static_cast<double>(j) * rate;
    const auto i = std::min<std::int64_t>(static_cast<std::int64_t>(position), n - 1);
    const double frac = position - static_cast<double>(i);
    const double a = clip.samples[i];
    const double b = i + 1 < n ? clip.samples[i + 1] : a;
    out.samples[j] = static_cast<Scalar>(frac == 0 ? a : a + frac * (b - a));
  }
  return out;
}

double draw_tempo_rate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(kMinTempo, kMaxTempo)(rng);
}

std::pair<AudioClip, AudioClip> tempo_perturb_pair(const AudioClip& noisy, const AudioClip& clean,
                                                   std::uint64_t seed) {
  const double rate = draw_tempo_rate(seed);
  return {tempo_perturb(noisy, rate), tempo_perturb(clean, rate)};
}

std::vector<fs::path> list_wavs(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return {dir};
  if (!fs::is_directory(dir)) throw DataError("not a file or directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<CorpusPair> pair_corpus(const fs::path& noisy_dir, const fs::path& clean_dir,
                                    std::vector<std::string>* warnings) {
  if (!fs::is_directory(noisy_dir)) throw DataError("noisy directory not found: " + noisy_dir.string());
  if (!fs::is_directory(clean_dir)) throw DataError("clean directory not found: " + clean_dir.string());
  std::map<std::string, fs::path> noisy, clean;
  for (const auto& p : list_wavs(noisy_dir)) noisy[p.filename().string()] = p;
  for (const auto& p : list_wavs(clean_dir)) clean[p.filename().string()] = p;

  const auto warn = [&](const std::string& msg) {
    if (warnings) {
      warnings->push_back(msg);
    } else {
      std::cerr << "warning: " << msg << '\n';
    }
  };
  for (const auto& [name, path] : noisy) {
    if (!clean.count(name)) warn("no clean match for noisy file " + path.string() + "; skipped");
  }
  for (const auto& [name, path] : clean) {
    if (!noisy.count(name)) warn("no noisy match for clean file " + path.string() + "; skipped");
  }

  std::vector<CorpusPair> pairs;
  for (const auto& [name, noisy_path] : noisy) {
    auto it = clean.find(name);
    if (it == clean.end()) continue;
    CorpusPair pair{name, read_wav(noisy_path), read_wav(it->second)};
    if (pair.noisy.sample_rate != pair.clean.sample_rate) {
      throw DataError("utterance " + name + ": sample rates differ (" + std::to_string(pair.noisy.sample_rate) +
                      " vs " + std::to_string(pair.clean.sample_rate) + ")");
    }
    if (pair.noisy.samples.size() != pair.clean.samples.size()) {
      throw DataError("utterance " + name + ": noisy has " + std::to_string(pair.noisy.samples.size()) +
                      " samples, clean has " + std::to_string(pair.clean.samples.size()));
    }
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) {
    throw DataError("no matching WAV names between " + noisy_dir.string() + " and " + clean_dir.string());
  }
  return pairs;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
