#pragma once

#include <cstdint>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Sequence split into chunks of size C with hop C/2. `data` is
/// [..., Ch, P, C]; chunk p covers samples [p*hop, p*hop + C) of the
/// zero-padded source.
struct ChunkedView {
  Tensor data;
  std::int64_t original_length = 0;
  std::int64_t hop = 0;

  std::int64_t chunk_size() const { return data.shape().back(); }
  std::int64_t num_chunks() const { return data.size(-2); }
};

/// P = ceil(max(T - C, 0) / (C/2)) + 1.
std::int64_t chunk_count(std::int64_t length, std::int64_t chunk_size);

/// Splits the last axis of x ([Ch,T] or [B,Ch,T]) into 50%-overlapping
/// chunks. Differentiable.
ChunkedView chunk(const Tensor& x, std::int64_t chunk_size);

/// Overlap-add with per-sample averaging by coverage count, truncated to the
/// original length. merge(chunk(x, C)) reproduces x. Differentiable.
Tensor merge(const ChunkedView& view);

}  // namespace MANNER_ABI_NS
}  // namespace manner
