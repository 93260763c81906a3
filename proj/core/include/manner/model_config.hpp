#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "manner/attention.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

enum class Variant { kFull, kSmall };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

/// Architecture hyperparameters. Defaults are the published MANNER setting.
struct ModelConfig {
  int kernel = 8;                 // K, Down/Up Conv kernel
  int stride = 4;                 // S, Down/Up Conv stride
  std::int64_t channels = 60;     // N
  int depth = 4;                  // L
  std::int64_t chunk_size = 64;   // C
  Variant variant = Variant::kFull;
  int growth_inner = 2;           // G0, expansion inside ResCon
  int growth_encoder = 2;         // G1 in the encoder
  double growth_decoder = 0.5;    // G1 in the decoder
  int rescon_kernel = 31;         // depthwise kernel inside ResCon
  int input_kernel = 3;           // first convolution 1 -> N
  AttentionPaths attention;       // ablation switches

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;

  /// Channel count after encoder layer `layer` (1-based); 0 gives N.
  std::int64_t encoder_channels(int layer) const;
  /// Time-axis downsampling of the whole encoder, S^L.
  std::int64_t length_unit() const;
  /// Smallest multiple of S^L that is >= length.
  std::int64_t padded_length(std::int64_t length) const;
  /// Whether layer `layer` (1-based) carries an attention block.
  bool has_attention(int layer) const;

  /// Flat key/value form used by config files and checkpoints.
  std::map<std::string, std::string> to_entries() const;
  /// Inverse of to_entries(); unknown keys are rejected, missing keys keep
  /// their defaults.
  static ModelConfig from_entries(const std::map<std::string, std::string>& entries);

  bool operator==(const ModelConfig& other) const;
};

}  // namespace MANNER_ABI_NS
}  // namespace manner
