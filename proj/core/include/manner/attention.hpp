#pragma once

#include <cstdint>

#include "manner/layers.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Channel attention on an unchunked path x [B, Ch, T]:
///   alpha = sigmoid(W1 W0 avg_t(x) + W1 W0 max_t(x))
/// with W0: Ch -> Ch/2 and W1: Ch/2 -> Ch shared by both pooled branches,
/// and output x * alpha broadcast over time.
struct ChannelAttention {
  Linear squeeze;  // W0
  Linear expand;   // W1

  static ChannelAttention create(ParamBuilder& b, std::int64_t channels);

  /// alpha, shape [B, Ch].
  Tensor weights(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;
};

/// Single-head self-attention across the chunk axis of x [B, Ch, P, C]. Each
/// chunk's C samples are its feature vector; queries, keys and values are
/// C x C linear maps shared across channels, scores are scaled by 1/sqrt(C).
struct GlobalAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  static GlobalAttention create(ParamBuilder& b, std::int64_t chunk_size);

  /// Row-stochastic attention matrix, shape [B*Ch, P, P].
  Tensor weights(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;
};

/// Convolutional attention inside each chunk of x [B, Ch, P, C]. Chunks are
/// folded into the batch; a depthwise convolution with kernel C/2 - 1 feeds
/// channel-wise average and max pooling, whose two maps are fused by a 2 -> 1
/// convolution into alpha in (0,1)^{C} per chunk. Output is x * alpha.
struct LocalAttention {
  Conv1d depthwise;
  Conv1d fuse;

  static constexpr int kFuseKernel = 7;

  static LocalAttention create(ParamBuilder& b, std::int64_t channels, std::int64_t chunk_size);

  /// alpha, shape [B*P, 1, C].
  Tensor weights(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;
};

/// Which of the three views a block computes. Disabled paths are not built.
struct AttentionPaths {
  bool channel = true;
  bool global = true;
  bool local = true;

  int count() const { return int(channel) + int(global) + int(local); }
};

/// Multi-view attention block over x [B, N, T], N divisible by 6. Each
/// enabled path starts with a pointwise N -> N/3 convolution; the global and
/// local paths run on 50%-overlapping chunks of size C. The concatenated
/// views pass an exit convolution z, and the output is x + z * gate(z).
struct MABlock {
  std::int64_t channels = 0;
  std::int64_t chunk_size = 0;
  AttentionPaths paths;

  Conv1d enter_channel, enter_global, enter_local;
  ChannelAttention channel_attention;
  GlobalAttention global_attention;
  LocalAttention local_attention;
  Conv1d exit;
  Conv1d gate_sigmoid, gate_tanh;

  static MABlock create(ParamBuilder& b, std::int64_t channels, std::int64_t chunk_size, AttentionPaths paths = {});

  Tensor forward(const Tensor& x) const;
};

}  // namespace MANNER_ABI_NS
}  // namespace manner
