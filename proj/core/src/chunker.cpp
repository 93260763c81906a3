#include "manner/chunker.hpp"

#include <algorithm>

#include "manner/autograd.hpp"
#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

std::int64_t chunk_count(std::int64_t length, std::int64_t chunk_size) {
  if (chunk_size < 2 || chunk_size % 2 != 0) {
    throw ShapeError("chunk size must be even and >= 2, got " + std::to_string(chunk_size));
  }
  if (length < 1) throw ShapeError("cannot chunk an empty sequence");
  const std::int64_t hop = chunk_size / 2;
  const std::int64_t rest = std::max<std::int64_t>(length - chunk_size, 0);
  return (rest + hop - 1) / hop + 1;
}

ChunkedView chunk(const Tensor& x, std::int64_t chunk_size) {
  if (x.rank() < 2) throw ShapeError("chunk: expected [Ch,T] or [B,Ch,T], got " + to_string(x.shape()));
  const std::int64_t length = x.shape().back();
  const std::int64_t chunks = chunk_count(length, chunk_size);
  const std::int64_t hop = chunk_size / 2;
  const std::int64_t rows = x.numel() / length;

  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(chunks);
  out_shape.push_back(chunk_size);
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xs = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const Scalar* src = xs.data() + r * length;
    Scalar* dst = o.data() + r * chunks * chunk_size;
    for (std::int64_t p = 0; p < chunks; ++p) {
      const std::int64_t start = p * hop;
      const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, chunk_size);
      std::copy_n(src + start, n, dst + p * chunk_size);
    }
  }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi, rows, length, chunks, chunk_size, hop] {
      auto& gx = detail::grad_buffer(*xi);
      for (std::int64_t r = 0; r < rows; ++r) {
        Scalar* dst = gx.data() + r * length;
        const Scalar* src = oi->grad.data() + r * chunks * chunk_size;
        for (std::int64_t p = 0; p < chunks; ++p) {
          const std::int64_t start = p * hop;
          const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, chunk_size);
          for (std::int64_t i = 0; i < n; ++i) dst[start + i] += src[p * chunk_size + i];
        }
      }
    });
  }
  return ChunkedView{out, length, hop};
}

Tensor merge(const ChunkedView& view) {
  const Tensor& data = view.data;
  if (!data.defined() || data.rank() < 3) throw ShapeError("merge: chunk data must be [..., Ch, P, C]");
  const std::int64_t chunk_size = view.chunk_size();
  const std::int64_t chunks = view.num_chunks();
  const std::int64_t hop = view.hop;
  const std::int64_t length = view.original_length;
  if (hop * 2 != chunk_size || length < 1 || chunks != chunk_count(length, chunk_size)) {
    throw ShapeError("merge: inconsistent chunk metadata (C=" + std::to_string(chunk_size) + ", hop=" +
                     std::to_string(hop) + ", P=" + std::to_string(chunks) + ", T=" + std::to_string(length) + ")");
  }
  const std::int64_t rows = data.numel() / (chunks * chunk_size);

  // Coverage count of every output sample.
  std::vector<Scalar> inv_cover(static_cast<std::size_t>(length), Scalar{0});
  for (std::int64_t p = 0; p < chunks; ++p) {
    const std::int64_t start = p * hop;
    const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, chunk_size);
    for (std::int64_t i = 0; i < n; ++i) inv_cover[start + i] += 1;
  }
  for (auto& c : inv_cover) c = Scalar{1} / c;

  Shape out_shape(data.shape().begin(), data.shape().end() - 2);
  out_shape.push_back(length);
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto ds = data.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const Scalar* src = ds.data() + r * chunks * chunk_size;
    Scalar* dst = o.data() + r * length;
    for (std::int64_t p = 0; p < chunks; ++p) {
      const std::int64_t start = p * hop;
      const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, chunk_size);
      for (std::int64_t i = 0; i < n; ++i) dst[start + i] += src[p * chunk_size + i];
    }
    for (std::int64_t t = 0; t < length; ++t) dst[t] *= inv_cover[t];
  }
  if (detail::should_record({&data})) {
    auto di = data.impl(), oi = out.impl();
    detail::record(out, [di, oi, rows, length, chunks, chunk_size, hop, inv_cover = std::move(inv_cover)] {
      auto& gd = detail::grad_buffer(*di);
      for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* src = oi->grad.data() + r * length;
        Scalar* dst = gd.data() + r * chunks * chunk_size;
        for (std::int64_t p = 0; p < chunks; ++p) {
          const std::int64_t start = p * hop;
          const std::int64_t n = std::clamp<std::int64_t>(length - start, 0, chunk_size);
          for (std::int64_t i = 0; i < n; ++i) dst[p * chunk_size + i] += src[start + i] * inv_cover[start + i];
        }
      }
    });
  }
  return out;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
