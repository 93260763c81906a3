#include "manner/model.hpp"

#include <cmath>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

ResCon ResCon::create(ParamBuilder& b, std::int64_t in_channels, std::int64_t out_channels, int growth_inner,
                      int depthwise_kernel) {
  const std::int64_t hidden = in_channels * growth_inner;
  ResCon r;
  r.expand = Conv1d::pointwise(b, "expand", in_channels, hidden);
  r.expand_norm = BatchNorm1d::create(b, "expand_norm", hidden);
  r.depthwise = Conv1d::create(b, "depthwise", hidden, hidden, depthwise_kernel, 1, depthwise_kernel / 2,
                               static_cast<int>(hidden));
  r.depthwise_norm = BatchNorm1d::create(b, "depthwise_norm", hidden);
  r.project = Conv1d::pointwise(b, "project", hidden, out_channels);
  r.residual = Conv1d::pointwise(b, "residual", in_channels, out_channels);
  return r;
}

Tensor ResCon::forward(const Tensor& x, bool training) const {
  Tensor h = relu(expand_norm.forward(expand.forward(x), training));
  h = relu(depthwise_norm.forward(depthwise.forward(h), training));
  return add(project.forward(h), residual.forward(x));
}

DownConv DownConv::create(ParamBuilder& b, std::int64_t channels, int kernel, int stride) {
  return DownConv{Conv1d::create(b, "conv", channels, channels, kernel, stride, (kernel - stride) / 2),
                  BatchNorm1d::create(b, "norm", channels)};
}

Tensor DownConv::forward(const Tensor& x, bool training) const {
  if (x.size(2) % conv.stride != 0) {
    throw ShapeError("down conv: length " + std::to_string(x.size(2)) + " not divisible by stride " +
                     std::to_string(conv.stride));
  }
  return relu(norm.forward(conv.forward(x), training));
}

UpConv UpConv::create(ParamBuilder& b, std::int64_t channels, int kernel, int stride) {
  return UpConv{ConvTranspose1d::create(b, "conv", channels, channels, kernel, stride, (kernel - stride) / 2),
                BatchNorm1d::create(b, "norm", channels)};
}

Tensor UpConv::forward(const Tensor& x, bool training) const { return relu(norm.forward(conv.forward(x), training)); }

MaskGate MaskGate::create(ParamBuilder& b, std::int64_t channels) {
  return MaskGate{Conv1d::pointwise(b, "sigmoid_branch", channels, channels),
                  Conv1d::pointwise(b, "tanh_branch", channels, channels)};
}

MannerModel::MannerModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  ParamBuilder root(tree_, seed);
  const auto& c = config_;

  auto input = root.child("input");
  input_conv_ = Conv1d::create(input, "conv", 1, c.channels, c.input_kernel, 1, c.input_kernel / 2);
  input_norm_ = BatchNorm1d::create(input, "norm", c.channels);

  for (int l = 1; l <= c.depth; ++l) {
    auto layer = root.child("encoder." + std::to_string(l));
    const auto in_ch = c.encoder_channels(l - 1);
    const auto out_ch = c.encoder_channels(l);
    EncoderLayer e;
    auto down = layer.child("down");
    e.down = DownConv::create(down, in_ch, c.kernel, c.stride);
    auto rescon = layer.child("rescon");
    e.rescon = ResCon::create(rescon, in_ch, out_ch, c.growth_inner, c.rescon_kernel);
    if (c.has_attention(l)) {
      auto att = layer.child("attention");
      e.attention = MABlock::create(att, out_ch, c.chunk_size, c.attention);
    }
    encoder_.push_back(std::move(e));
  }

  const auto deepest = c.encoder_channels(c.depth);
  bottleneck_ = Conv1d::pointwise(root, "bottleneck", deepest, deepest);

  decoder_.resize(static_cast<std::size_t>(c.depth));
  for (int l = c.depth; l >= 1; --l) {
    auto layer = root.child("decoder." + std::to_string(l));
    const auto in_ch = c.encoder_channels(l);
    const double out_exact = static_cast<double>(in_ch) * c.growth_decoder;
    const auto out_ch = static_cast<std::int64_t>(std::llround(out_exact));
    if (std::abs(out_exact - static_cast<double>(out_ch)) > 1e-9) {
      throw ConfigError("decoder ResCon output channels are not integral at layer " + std::to_string(l));
    }
    DecoderLayer& d = decoder_[static_cast<std::size_t>(l - 1)];
    auto rescon = layer.child("rescon");
    d.rescon = ResCon::create(rescon, in_ch, out_ch, c.growth_inner, c.rescon_kernel);
    if (c.has_attention(l)) {
      auto att = layer.child("attention");
      d.attention = MABlock::create(att, out_ch, c.chunk_size, c.attention);
    }
    auto up = layer.child("up");
    d.up = UpConv::create(up, out_ch, c.kernel, c.stride);
  }

  auto mask = root.child("mask");
  mask_ = MaskGate::create(mask, c.channels);
  output_conv_ = Conv1d::pointwise(root, "output", c.channels, 1);
}

Tensor MannerModel::forward(const Tensor& noisy, bool training, ForwardTrace* trace) const {
  if (noisy.rank() != 3 || noisy.size(1) != 1 || noisy.size(2) < 1) {
    throw ShapeError("model input must be [B,1,T] with T >= 1, got " + to_string(noisy.shape()));
  }
  const std::int64_t length = noisy.size(2);
  const std::int64_t padded = config_.padded_length(length);
  const Tensor x = padded == length ? noisy : pad_last(noisy, 0, padded - length);
  if (trace) trace->padded_input = x.shape();

  const Tensor x0 = relu(input_norm_.forward(input_conv_.forward(x), training));

  Tensor h = x0;
  std::vector<Tensor> skips;
  skips.reserve(encoder_.size());
  for (const auto& layer : encoder_) {
    h = layer.down.forward(h, training);
    h = layer.rescon.forward(h, training);
    if (layer.attention) h = layer.attention->forward(h);
    skips.push_back(h);
    if (trace) trace->encoder_outputs.push_back(h.shape());
  }

  h = bottleneck_.forward(h);
  if (trace) trace->bottleneck = h.shape();

  for (std::size_t i = decoder_.size(); i-- > 0;) {
    const auto& layer = decoder_[i];
    h = add(h, skips[i]);
    skips[i] = Tensor();  // release the skip as soon as it has been consumed
    h = layer.rescon.forward(h, training);
    if (layer.attention) h = layer.attention->forward(h);
    h = layer.up.forward(h, training);
    if (trace) trace->decoder_outputs.push_back(h.shape());
  }

  const Tensor m = mask_.forward(h);
  Tensor out = output_conv_.forward(mul(m, x0));
  if (padded != length) out = slice(out, 2, 0, length);
  if (trace) trace->output = out.shape();
  return out;
}

MannerModel build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  return MannerModel(config, seed);
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
