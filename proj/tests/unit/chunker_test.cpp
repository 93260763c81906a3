#include <gtest/gtest.h>

#include <random>

#include "manner/autograd.hpp"
#include "manner/chunker.hpp"
#include "manner/errors.hpp"
#include "manner/ops.hpp"
#include "support.hpp"

namespace {

using namespace manner;
using test::random_tensor;

// Independent count: step the chunk start by C/2 until the source is covered.
std::int64_t covering_chunks(std::int64_t T, std::int64_t C) {
  std::int64_t p = 1;
  while ((p - 1) * (C / 2) + C < T) ++p;
  return p;
}

TEST(Chunker, CountFormula) {
  EXPECT_EQ(chunk_count(1000, 64), 31);
  EXPECT_EQ(chunk_count(64, 64), 1);
  EXPECT_EQ(chunk_count(10, 64), 1);
  EXPECT_EQ(chunk_count(65, 64), 2);
  EXPECT_EQ(chunk_count(96, 64), 2);
  EXPECT_EQ(chunk_count(97, 64), 3);
  for (std::int64_t C : {2, 4, 16, 64})
    for (std::int64_t T = 1; T < 300; ++T) ASSERT_EQ(chunk_count(T, C), covering_chunks(T, C)) << T << " " << C;
  EXPECT_THROW(chunk_count(10, 3), ShapeError);
  EXPECT_THROW(chunk_count(0, 4), ShapeError);
}

TEST(Chunker, LayoutOfChunks) {
  Tensor x({1, 10}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto v = chunk(x, 4);
  ASSERT_EQ(v.data.shape(), (Shape{1, 4, 4}));
  EXPECT_EQ(v.hop, 2);
  EXPECT_EQ(v.original_length, 10);
  EXPECT_EQ(v.data.at({0, 1, 0}), 2);
  EXPECT_EQ(v.data.at({0, 3, 3}), 9);
  // The last chunk runs one sample past the end and is zero padded.
  auto w = chunk(Tensor({1, 7}, {1, 2, 3, 4, 5, 6, 7}), 4);
  ASSERT_EQ(w.num_chunks(), 3);
  EXPECT_EQ(w.data.at({0, 2, 3}), 0);
}

TEST(Chunker, RoundTripRandomized) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> channels(1, 5), lengths(1, 400);
  const std::int64_t sizes[] = {2, 4, 8, 16, 64};
  for (int trial = 0; trial < 60; ++trial) {
    const auto C = sizes[trial % 5];
    const std::int64_t Ch = channels(rng), T = lengths(rng);
    Tensor x = random_tensor({Ch, T}, 100 + trial);
    auto view = chunk(x, C);
    EXPECT_EQ(view.num_chunks(), chunk_count(T, C));
    auto y = merge(view);
    ASSERT_EQ(y.shape(), x.shape());
    EXPECT_LE(test::max_abs_diff(x.data(), y.data()), 1e-6) << "Ch=" << Ch << " T=" << T << " C=" << C;
  }
}

TEST(Chunker, RoundTripEdgeLengths) {
  for (std::int64_t T : {1, 31, 32, 33, 63, 64, 65, 1000}) {
    Tensor x = random_tensor({2, 3, T}, static_cast<std::uint64_t>(T));
    auto view = chunk(x, 64);
    EXPECT_EQ(view.data.shape(), (Shape{2, 3, chunk_count(T, 64), 64}));
    auto y = merge(view);
    EXPECT_LE(test::max_abs_diff(x.data(), y.data()), 1e-6) << T;
  }
}

TEST(Chunker, MergeAveragesOverlaps) {
  // Chunks holding different values are averaged where they overlap.
  Tensor x({1, 6}, {0, 0, 0, 0, 0, 0});
  auto view = chunk(x, 4);
  ASSERT_EQ(view.num_chunks(), 2);
  auto d = view.data.mutable_data();
  for (int i = 0; i < 4; ++i) d[i] = 1;
  for (int i = 4; i < 8; ++i) d[i] = 3;
  auto y = merge(view);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{1, 1, 2, 2, 3, 3}));
}

TEST(Chunker, GradientOfRoundTripIsIdentity) {
  Tensor x = random_tensor({2, 37}, 7);
  x.set_requires_grad(true);
  Tensor w = random_tensor({2, 37}, 8);
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, sum(mul(merge(chunk(x, 8)), w)));
  }
  EXPECT_LE(test::max_abs_diff(x.grad(), w.data()), 1e-6);
}

}  // namespace
