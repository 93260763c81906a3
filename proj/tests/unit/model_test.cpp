#include <gtest/gtest.h>

#include "manner/errors.hpp"
#include "manner/model.hpp"
#include "support.hpp"

namespace {

using namespace manner;
using test::random_tensor;

// Per-layer shape arithmetic, written against the architecture description
// rather than the parameter tree.
struct Counter {
  const ModelConfig& c;

  static std::int64_t conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t groups = 1) {
    return out * (in / groups) * k + out;
  }
  static std::int64_t norm(std::int64_t ch) { return 2 * ch; }

  std::int64_t rescon(std::int64_t in, std::int64_t out) const {
    const auto hidden = in * c.growth_inner;
    return conv(in, hidden, 1) + norm(hidden) + conv(hidden, hidden, c.rescon_kernel, hidden) + norm(hidden) +
           conv(hidden, out, 1) + conv(in, out, 1);
  }

  std::int64_t block(std::int64_t n) const {
    const auto t = n / 3, C = c.chunk_size;
    std::int64_t p = 0;
    if (c.attention.channel) p += conv(n, t, 1) + (t * (t / 2) + t / 2) + ((t / 2) * t + t);
    if (c.attention.global) p += conv(n, t, 1) + 4 * (C * C + C);
    if (c.attention.local) p += conv(n, t, 1) + conv(t, t, C / 2 - 1, t) + conv(2, 1, 7);
    return p + conv(t * c.attention.count(), n, 1) + 2 * conv(n, n, 1);
  }

  std::int64_t total() const {
    const auto N = c.channels;
    std::int64_t p = conv(1, N, c.input_kernel) + norm(N);
    std::int64_t ch = N;
    for (int l = 1; l <= c.depth; ++l) {
      const bool attn = c.variant == Variant::kFull || l == c.depth;
      // encoder: down, rescon x2, block
      p += conv(ch, ch, c.kernel) + norm(ch) + rescon(ch, 2 * ch) + (attn ? block(2 * ch) : 0);
      // decoder: rescon x1/2, block, up
      p += rescon(2 * ch, ch) + (attn ? block(ch) : 0) + conv(ch, ch, c.kernel) + norm(ch);
      ch *= 2;
    }
    p += conv(ch, ch, 1);               // bottleneck
    p += 2 * conv(N, N, 1) + conv(N, 1, 1);  // mask gate, output
    return p;
  }
};

TEST(ModelConfig, DefaultsAndValidation) {
  ModelConfig c;
  EXPECT_EQ(c.kernel, 8);
  EXPECT_EQ(c.stride, 4);
  EXPECT_EQ(c.channels, 60);
  EXPECT_EQ(c.depth, 4);
  EXPECT_EQ(c.chunk_size, 64);
  EXPECT_EQ(c.length_unit(), 256);
  EXPECT_EQ(c.padded_length(63999), 64000);
  EXPECT_EQ(c.padded_length(1), 256);
  for (int l = 0; l <= 4; ++l) EXPECT_EQ(c.encoder_channels(l), 60 << l);
  EXPECT_NO_THROW(c.validate());

  auto bad = c;
  bad.channels = 64;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.kernel = 4;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.chunk_size = 63;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ModelConfig, EntriesRoundTrip) {
  ModelConfig c;
  c.channels = 12;
  c.depth = 2;
  c.variant = Variant::kSmall;
  c.attention.global = false;
  EXPECT_EQ(ModelConfig::from_entries(c.to_entries()), c);
  EXPECT_THROW(ModelConfig::from_entries({{"nonsense", "1"}}), ConfigError);
  EXPECT_THROW(ModelConfig::from_entries({{"channels", "twelve"}}), ConfigError);
  EXPECT_EQ(parse_variant("small"), Variant::kSmall);
  EXPECT_THROW(parse_variant("medium"), ConfigError);
}

TEST(Model, DefaultShapesAt64000) {
  MannerModel model(ModelConfig{}, 1);
  ForwardTrace trace;
  Tensor x = random_tensor({1, 1, 64000}, 2, 0.1);
  auto y = model.forward(x, false, &trace);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 64000}));
  ASSERT_EQ(trace.encoder_outputs.size(), 4u);
  const std::int64_t lengths[] = {16000, 4000, 1000, 250}, channels[] = {120, 240, 480, 960};
  for (int l = 0; l < 4; ++l) EXPECT_EQ(trace.encoder_outputs[l], (Shape{1, channels[l], lengths[l]})) << l;
  EXPECT_EQ(trace.bottleneck, (Shape{1, 960, 250}));
  ASSERT_EQ(trace.decoder_outputs.size(), 4u);
  EXPECT_EQ(trace.decoder_outputs.back(), (Shape{1, 60, 64000}));
}

TEST(Model, RaggedLengthsArePadded) {
  ModelConfig c;
  c.channels = 12;
  c.depth = 2;
  c.chunk_size = 16;
  MannerModel model(c, 3);
  for (std::int64_t T : {1, 15, 16, 17, 100}) {
    ForwardTrace trace;
    auto y = model.forward(random_tensor({2, 1, T}, 4), false, &trace);
    EXPECT_EQ(y.shape(), (Shape{2, 1, T}));
    EXPECT_EQ(trace.padded_input[2] % 16, 0);
  }
  MannerModel full(ModelConfig{}, 5);
  EXPECT_EQ(full.forward(random_tensor({1, 1, 63999}, 6, 0.1), false).shape(), (Shape{1, 1, 63999}));
}

TEST(Model, PaddingDoesNotLeakIntoTheKeptSamples) {
  // Output on the kept prefix is the forward pass of the zero-padded input.
  ModelConfig c;
  c.channels = 12;
  c.depth = 2;
  c.chunk_size = 16;
  MannerModel model(c, 7);
  Tensor x = random_tensor({1, 1, 30}, 8);
  auto padded = model.forward(pad_last(x, 0, 2), false);
  auto ragged = model.forward(x, false);
  EXPECT_LE(test::max_abs_diff(ragged.data(), padded.data().subspan(0, 30)), 1e-6);
}

TEST(Model, ParameterCountMatchesShapeArithmetic) {
  for (auto variant : {Variant::kFull, Variant::kSmall}) {
    ModelConfig c;
    c.variant = variant;
    MannerModel model(c, 1);
    EXPECT_EQ(model.parameters().parameter_count(), Counter{c}.total()) << to_string(variant);
  }
  ModelConfig toy;
  toy.channels = 12;
  toy.depth = 2;
  toy.chunk_size = 16;
  toy.attention.local = false;
  EXPECT_EQ(MannerModel(toy, 1).parameters().parameter_count(), Counter{toy}.total());
}

TEST(Model, FrozenDefaultParameterCounts) {
  ModelConfig full;
  ModelConfig small;
  small.variant = Variant::kSmall;
  EXPECT_EQ(MannerModel(full, 1).parameters().parameter_count(), 19233091);
  EXPECT_EQ(MannerModel(small, 1).parameters().parameter_count(), 17560051);
}

TEST(Model, SmallVariantHasAttentionOnlyInTheDeepestLayer) {
  ModelConfig c;
  c.variant = Variant::kSmall;
  MannerModel small(c, 1);
  for (int l = 0; l < 4; ++l) {
    EXPECT_EQ(small.encoder()[l].attention.has_value(), l == 3);
    EXPECT_EQ(small.decoder()[l].attention.has_value(), l == 3);
  }
  EXPECT_LT(small.parameters().parameter_count(), MannerModel(ModelConfig{}, 1).parameters().parameter_count());
  EXPECT_EQ(small.forward(random_tensor({1, 1, 16000}, 2, 0.1), false).shape(), (Shape{1, 1, 16000}));
}

TEST(Model, SameSeedSameParameters) {
  ModelConfig c;
  c.channels = 12;
  c.depth = 2;
  c.chunk_size = 16;
  MannerModel a(c, 9), b(c, 9), d(c, 10);
  const auto& ea = a.parameters().entries();
  const auto& eb = b.parameters().entries();
  ASSERT_EQ(ea.size(), eb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_EQ(ea[i].name, eb[i].name);
    EXPECT_EQ(test::max_abs_diff(ea[i].tensor.data(), eb[i].tensor.data()), 0) << ea[i].name;
    if (test::max_abs_diff(ea[i].tensor.data(), d.parameters().entries()[i].tensor.data()) > 0) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, InferenceIsDeterministicAndLeavesStatsAlone) {
  ModelConfig c;
  c.channels = 12;
  c.depth = 2;
  c.chunk_size = 16;
  MannerModel model(c, 11);
  Tensor x = random_tensor({1, 1, 200}, 12);
  auto before = model.parameters().get("input.norm.running_mean").detach();
  auto y1 = model.forward(x, false), y2 = model.forward(x, false);
  EXPECT_EQ(test::max_abs_diff(y1.data(), y2.data()), 0);
  EXPECT_EQ(test::max_abs_diff(before.data(), model.parameters().get("input.norm.running_mean").data()), 0);
  (void)model.forward(x, true);
  EXPECT_GT(test::max_abs_diff(before.data(), model.parameters().get("input.norm.running_mean").data()), 0);
}

TEST(Blocks, ResConChannelGrowth) {
  ParameterTree tree;
  ParamBuilder b(tree, 1);
  auto grow = b.child("grow"), shrink = b.child("shrink");
  auto up = ResCon::create(grow, 60, 120, 2, 31);
  auto down = ResCon::create(shrink, 120, 60, 2, 31);
  Tensor x = random_tensor({1, 60, 40}, 2);
  auto y = up.forward(x, true);
  EXPECT_EQ(y.shape(), (Shape{1, 120, 40}));
  EXPECT_EQ(down.forward(y, true).shape(), (Shape{1, 60, 40}));
}

TEST(Blocks, ResConWithSilentMainBranchIsTheResidual) {
  ParameterTree tree;
  ParamBuilder b(tree, 3);
  auto r = ResCon::create(b, 6, 12, 2, 5);
  for (auto& v : r.project.weight.mutable_data()) v = 0;
  Tensor x = random_tensor({2, 6, 10}, 4);
  EXPECT_LE(test::max_abs_diff(r.forward(x, true).data(), r.residual.forward(x).data()), 1e-6);
}

TEST(Blocks, DownUpAreShapeInverses) {
  ParameterTree tree;
  ParamBuilder b(tree, 5);
  auto down_scope = b.child("down"), up_scope = b.child("up");
  auto down = DownConv::create(down_scope, 6, 8, 4);
  auto up = UpConv::create(up_scope, 6, 8, 4);
  EXPECT_EQ(down.conv.padding, 2);
  Tensor x = random_tensor({1, 6, 64}, 6);
  auto d = down.forward(x, true);
  EXPECT_EQ(d.shape(), (Shape{1, 6, 16}));
  EXPECT_EQ(up.forward(d, true).shape(), x.shape());
}

TEST(Blocks, MaskGateRange) {
  ParameterTree tree;
  ParamBuilder b(tree, 7);
  auto m = MaskGate::create(b, 6);
  auto y = m.forward(random_tensor({2, 6, 50}, 8, 3.0));
  for (auto v : y.data()) {
    EXPECT_GE(v, 0);
    EXPECT_LT(v, 1);
  }
  for (auto& v : m.sigmoid_branch.weight.mutable_data()) v = 0;
  for (auto& v : m.tanh_branch.weight.mutable_data()) v = 0;
  const Tensor closed = m.forward(random_tensor({1, 6, 5}, 9));
  for (auto v : closed.data()) EXPECT_EQ(v, 0);
}

}  // namespace
