#include "manner/attention.hpp"

#include <cmath>

#include "manner/chunker.hpp"
#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

ChannelAttention ChannelAttention::create(ParamBuilder& b, std::int64_t channels) {
  if (channels < 2 || channels % 2 != 0) {
    throw ConfigError("channel attention needs an even channel count, got " + std::to_string(channels));
  }
  auto s = b.child("channel_attention");
  return ChannelAttention{Linear::create(s, "squeeze", channels, channels / 2),
                          Linear::create(s, "expand", channels / 2, channels)};
}

Tensor ChannelAttention::weights(const Tensor& x) const {
  if (x.rank() != 3 || x.size(1) != squeeze.weight.size(0)) {
    throw ShapeError("channel attention: expected [B," + std::to_string(squeeze.weight.size(0)) + ",T], got " +
                     to_string(x.shape()));
  }
  const Tensor avg = pool(PoolKind::kAvg, x, 2);
  const Tensor max = pool(PoolKind::kMax, x, 2);
  const Tensor a = expand.forward(squeeze.forward(avg));
  const Tensor m = expand.forward(squeeze.forward(max));
  return sigmoid(add(a, m));
}

Tensor ChannelAttention::forward(const Tensor& x) const {
  const Tensor alpha = weights(x);
  return mul_broadcast(x, reshape(alpha, {x.size(0), x.size(1), 1}));
}

GlobalAttention GlobalAttention::create(ParamBuilder& b, std::int64_t chunk_size) {
  auto s = b.child("global_attention");
  GlobalAttention g;
  g.query = Linear::create(s, "query", chunk_size, chunk_size);
  g.key = Linear::create(s, "key", chunk_size, chunk_size);
  g.value = Linear::create(s, "value", chunk_size, chunk_size);
  g.output = Linear::create(s, "output", chunk_size, chunk_size);
  return g;
}

namespace {

void check_chunked(const Tensor& x, std::int64_t chunk_size, const char* who) {
  if (x.rank() != 4 || x.size(3) != chunk_size) {
    throw ShapeError(std::string(who) + ": expected [B,Ch,P," + std::to_string(chunk_size) + "], got " +
                     to_string(x.shape()));
  }
}

}  // namespace

Tensor GlobalAttention::weights(const Tensor& x) const {
  const std::int64_t c = query.weight.size(0);
  check_chunked(x, c, "global attention");
  const std::int64_t rows = x.size(0) * x.size(1), chunks = x.size(2);
  const Tensor q = reshape(query.forward(x), {rows, chunks, c});
  const Tensor k = reshape(key.forward(x), {rows, chunks, c});
  const Tensor scores = scale(matmul(q, permute(k, {0, 2, 1})), Scalar(1) / std::sqrt(static_cast<Scalar>(c)));
  return softmax(scores, -1);
}

Tensor GlobalAttention::forward(const Tensor& x) const {
  const std::int64_t c = query.weight.size(0);
  const Tensor alpha = weights(x);
  const Tensor v = reshape(value.forward(x), {x.size(0) * x.size(1), x.size(2), c});
  return reshape(output.forward(matmul(alpha, v)), x.shape());
}

LocalAttention LocalAttention::create(ParamBuilder& b, std::int64_t channels, std::int64_t chunk_size) {
  if (chunk_size < 4 || chunk_size % 4 != 0) {
    throw ConfigError("local attention needs a chunk size divisible by 4 (odd kernel C/2-1), got " +
                      std::to_string(chunk_size));
  }
  const int kernel = static_cast<int>(chunk_size / 2 - 1);
  auto s = b.child("local_attention");
  LocalAttention l;
  l.depthwise = Conv1d::create(s, "depthwise", channels, channels, kernel, 1, (kernel - 1) / 2,
                               static_cast<int>(channels));
  l.fuse = Conv1d::create(s, "fuse", 2, 1, kFuseKernel, 1, kFuseKernel / 2);
  return l;
}

namespace {

// [B, Ch, P, C] -> [B*P, Ch, C]
Tensor fold_chunks(const Tensor& x) {
  return reshape(permute(x, {0, 2, 1, 3}), {x.size(0) * x.size(2), x.size(1), x.size(3)});
}

}  // namespace

Tensor LocalAttention::weights(const Tensor& x) const {
  if (x.rank() != 4 || x.size(1) != depthwise.weight.size(0)) {
    throw ShapeError("local attention: expected [B," + std::to_string(depthwise.weight.size(0)) + ",P,C], got " +
                     to_string(x.shape()));
  }
  const Tensor folded = fold_chunks(x);
  const Tensor y = depthwise.forward(folded);
  const Shape pooled_shape{folded.size(0), 1, folded.size(2)};
  const Tensor avg = reshape(pool(PoolKind::kAvg, y, 1), pooled_shape);
  const Tensor max = reshape(pool(PoolKind::kMax, y, 1), pooled_shape);
  return sigmoid(fuse.forward(concat({avg, max}, 1)));
}

Tensor LocalAttention::forward(const Tensor& x) const {
  const Tensor alpha = weights(x);
  const Tensor scaled = mul_broadcast(fold_chunks(x), alpha);
  return permute(reshape(scaled, {x.size(0), x.size(2), x.size(1), x.size(3)}), {0, 2, 1, 3});
}

MABlock MABlock::create(ParamBuilder& b, std::int64_t channels, std::int64_t chunk_size, AttentionPaths paths) {
  if (channels % 6 != 0) {
    throw ConfigError("multi-view attention needs channels divisible by 6, got " + std::to_string(channels));
  }
  if (paths.count() == 0) throw ConfigError("multi-view attention block with every path disabled");
  const std::int64_t third = channels / 3;
  MABlock m;
  m.channels = channels;
  m.chunk_size = chunk_size;
  m.paths = paths;
  if (paths.channel) {
    auto s = b.child("channel_path");
    m.enter_channel = Conv1d::pointwise(s, "enter", channels, third);
    m.channel_attention = ChannelAttention::create(s, third);
  }
  if (paths.global) {
    auto s = b.child("global_path");
    m.enter_global = Conv1d::pointwise(s, "enter", channels, third);
    m.global_attention = GlobalAttention::create(s, chunk_size);
  }
  if (paths.local) {
    auto s = b.child("local_path");
    m.enter_local = Conv1d::pointwise(s, "enter", channels, third);
    m.local_attention = LocalAttention::create(s, third, chunk_size);
  }
  m.exit = Conv1d::pointwise(b, "exit", third * paths.count(), channels);
  m.gate_sigmoid = Conv1d::pointwise(b, "gate_sigmoid", channels, channels);
  m.gate_tanh = Conv1d::pointwise(b, "gate_tanh", channels, channels);
  return m;
}

Tensor MABlock::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.size(1) != channels) {
    throw ShapeError("MA block: expected [B," + std::to_string(channels) + ",T], got " + to_string(x.shape()));
  }
  std::vector<Tensor> views;
  if (paths.channel) views.push_back(channel_attention.forward(enter_channel.forward(x)));
  if (paths.global) {
    ChunkedView view = chunk(enter_global.forward(x), chunk_size);
    view.data = global_attention.forward(view.data);
    views.push_back(merge(view));
  }
  if (paths.local) {
    ChunkedView view = chunk(enter_local.forward(x), chunk_size);
    view.data = local_attention.forward(view.data);
    views.push_back(merge(view));
  }
  const Tensor z = exit.forward(views.size() == 1 ? views.front() : concat(views, 1));
  return add(x, mul(z, gate(z, gate_sigmoid, gate_tanh)));
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
