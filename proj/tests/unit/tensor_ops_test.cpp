#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "manner/autograd.hpp"
#include "manner/errors.hpp"
#include "manner/gradcheck.hpp"
#include "manner/ops.hpp"
#include "support.hpp"

namespace {

using namespace manner;
using test::random_tensor;

constexpr double kTol = sizeof(Scalar) == 4 ? 1e-5 : 1e-12;

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Tensor, ConstructionAndIndexing) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6);
  EXPECT_EQ(t.size(-1), 3);
  EXPECT_EQ(t.at({1, 2}), 6);
  EXPECT_EQ(numel(Shape{4, 0, 2}), 0);
  EXPECT_EQ(to_string(Shape{2, 3}), "[2,3]");
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_EQ(Tensor::scalar(3).item(), 3);
}

TEST(Tensor, CopiesShareStorageDetachDoesNot) {
  Tensor a({3}, {1, 2, 3});
  Tensor b = a;
  Tensor c = a.detach();
  a.mutable_data()[0] = 9;
  EXPECT_EQ(b.data()[0], 9);
  EXPECT_EQ(c.data()[0], 1);
}

TEST(Ops, ElementwiseArithmetic) {
  Tensor a({4}, {1, -2, 3, -4}), b({4}, {2, 2, -1, 0.5});
  EXPECT_EQ(values(add(a, b)), (std::vector<double>{3, 0, 2, -3.5}));
  EXPECT_EQ(values(sub(a, b)), (std::vector<double>{-1, -4, 4, -4.5}));
  EXPECT_EQ(values(mul(a, b)), (std::vector<double>{2, -4, -3, -2}));
  EXPECT_EQ(values(div(a, b)), (std::vector<double>{0.5, -1, -3, -8}));
  EXPECT_EQ(values(relu(a)), (std::vector<double>{1, 0, 3, 0}));
  EXPECT_EQ(values(abs(a)), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(values(scale(a, 2)), (std::vector<double>{2, -4, 6, -8}));
  EXPECT_EQ(values(add_scalar(a, 1)), (std::vector<double>{2, -1, 4, -3}));
  EXPECT_THROW(add(a, Tensor({3})), ShapeError);
}

TEST(Ops, TranscendentalValues) {
  Tensor x({3}, {-1, 0, 2});
  const Tensor sx = sigmoid(x), tx = tanh(x);
  auto s = sx.data();
  auto t = tx.data();
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(s[i], 1 / (1 + std::exp(-double(x.data()[i]))), kTol);
    EXPECT_NEAR(t[i], std::tanh(double(x.data()[i])), kTol);
  }
  EXPECT_NEAR(log_clamped(Tensor({2}, {0, 4}), Scalar(1e-3)).data()[0], std::log(1e-3), 1e-4);
  EXPECT_NEAR(sqrt(Tensor({1}, {9})).item(), 3, kTol);
}

TEST(Ops, BroadcastMultiply) {
  Tensor x({2, 3, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  Tensor a({2, 3, 1}, {1, 0, 2, -1, 1, 0});
  EXPECT_EQ(values(mul_broadcast(x, a)), (std::vector<double>{1, 2, 0, 0, 10, 12, -7, -8, 9, 10, 0, 0}));
  EXPECT_THROW(mul_broadcast(x, Tensor({2, 2, 1})), ShapeError);
}

TEST(Ops, SoftmaxIsShiftInvariantAndNormalized) {
  Tensor x = random_tensor({3, 5}, 1, 3.0);
  Tensor shifted = add_scalar(x, 100);
  auto p = softmax(x, -1), q = softmax(shifted, -1);
  EXPECT_LT(test::max_abs_diff(p.data(), q.data()), 1e-6);
  for (int r = 0; r < 3; ++r) {
    double total = 0;
    for (int c = 0; c < 5; ++c) total += p.at({r, c});
    EXPECT_NEAR(total, 1, 1e-6);
  }
  // Axis 0 normalizes columns.
  auto col = softmax(x, 0);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(col.at({0, c}) + col.at({1, c}) + col.at({2, c}), 1, 1e-6);
}

TEST(Ops, ReductionsAndPooling) {
  Tensor x({2, 3}, {1, 5, 2, -1, -3, 4});
  EXPECT_NEAR(sum(x).item(), 8, kTol);
  EXPECT_NEAR(mean(x).item(), 8.0 / 6, kTol);
  EXPECT_EQ(values(pool(PoolKind::kMax, x, 1)), (std::vector<double>{5, 4}));
  EXPECT_EQ(values(pool(PoolKind::kMax, x, 0)), (std::vector<double>{1, 5, 4}));
  auto avg = pool(PoolKind::kAvg, x, 1);
  EXPECT_NEAR(avg.data()[0], 8.0 / 3, kTol);
  EXPECT_NEAR(avg.data()[1], 0, kTol);
}

TEST(Ops, MaxPoolRoutesGradientToFirstArgmax) {
  Tensor x({1, 4}, {2, 7, 7, 1});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, sum(pool(PoolKind::kMax, x, 1)));
  }
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0, 1, 0, 0}));
}

TEST(Ops, LayoutRoundTrips) {
  Tensor x = random_tensor({2, 3, 4}, 2);
  auto p = permute(x, {2, 0, 1});
  EXPECT_EQ(p.shape(), (Shape{4, 2, 3}));
  EXPECT_EQ(p.at({3, 1, 2}), x.at({1, 2, 3}));
  auto back = permute(p, {1, 2, 0});
  EXPECT_EQ(values(back), values(x));

  auto r = reshape(x, {6, -1});
  EXPECT_EQ(r.shape(), (Shape{6, 4}));
  EXPECT_THROW(reshape(x, {5, -1}), ShapeError);

  auto a = slice(x, 2, 0, 1), b = slice(x, 2, 1, 3);
  EXPECT_EQ(values(concat({a, b}, 2)), values(x));
  EXPECT_THROW(slice(x, 2, 3, 2), ShapeError);

  auto padded = pad_last(x, 1, 2);
  EXPECT_EQ(padded.shape(), (Shape{2, 3, 7}));
  EXPECT_EQ(padded.at({1, 1, 0}), 0);
  EXPECT_EQ(padded.at({1, 1, 1}), x.at({1, 1, 0}));
  EXPECT_EQ(padded.at({1, 1, 6}), 0);
}

TEST(Ops, MatmulMatchesNaiveProduct) {
  Tensor a = random_tensor({2, 3, 5}, 3), b = random_tensor({2, 5, 4}, 4);
  auto c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 4}));
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        double ref = 0;
        for (int k = 0; k < 5; ++k) ref += double(a.at({n, i, k})) * b.at({n, k, j});
        EXPECT_NEAR(c.at({n, i, j}), ref, 1e-5);
      }
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Ops, LinearAddsBias) {
  Tensor x({1, 2}, {1, 2}), w({2, 3}, {1, 0, 1, 0, 1, 1}), b({3}, {0.5, 0, -1});
  EXPECT_EQ(values(linear(x, w, b)), (std::vector<double>{1.5, 2, 2}));
  EXPECT_EQ(values(linear(x, w, Tensor())), (std::vector<double>{1, 2, 3}));
}

TEST(Autograd, ProductRuleAndAccumulation) {
  Tensor a = random_tensor({5}, 5), b = random_tensor({5}, 6);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    // a is used twice: d/da sum(a*b + a) = b + 1.
    backward(tape, sum(add(mul(a, b), a)));
  }
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(a.grad()[i], b.data()[i] + 1, kTol);
    EXPECT_NEAR(b.grad()[i], a.data()[i], kTol);
  }
}

TEST(Autograd, NothingRecordedWithoutTapeOrGradients) {
  Tensor a = random_tensor({3}, 7);
  Tape tape;
  {
    TapeScope scope(tape);
    (void)sum(mul(a, a));  // no input requires a gradient
  }
  EXPECT_EQ(tape.size(), 0u);
  a.set_requires_grad(true);
  (void)sum(mul(a, a));  // no active tape
  EXPECT_EQ(active_tape(), nullptr);
}

TEST(Autograd, ScopesNest) {
  Tape outer, inner;
  TapeScope a(outer);
  {
    TapeScope b(inner);
    EXPECT_EQ(active_tape(), &inner);
  }
  EXPECT_EQ(active_tape(), &outer);
}

TEST(Autograd, BackwardRejectsNonScalarAndDisconnectedLoss) {
  Tape tape;
  TapeScope scope(tape);
  Tensor x = random_tensor({3}, 8);
  x.set_requires_grad(true);
  EXPECT_THROW(backward(tape, relu(x)), ShapeError);
  EXPECT_THROW(backward(tape, Tensor::scalar(1)), Error);
}

TEST(Autograd, ClampedLogHasZeroGradientBelowFloor) {
  Tensor x({2}, {Scalar(1e-6), 2});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, sum(log_clamped(x, Scalar(1e-3))));
  }
  EXPECT_EQ(x.grad()[0], 0);
  EXPECT_NEAR(x.grad()[1], 0.5, kTol);
}

TEST(GradCheck, SmoothCompositePasses) {
  Tensor a = random_tensor({1, 3, 4}, 9, 0.5), b = random_tensor({1, 4, 2}, 10, 0.5);
  auto f = [](const std::vector<Tensor>& in) {
    return sum(mul(tanh(matmul(in[0], in[1])), softmax(matmul(in[0], in[1]), -1)));
  };
  const auto r = finite_diff_check(f, {a, b}, sizeof(Scalar) == 4 ? 1.0 / 128 : 1e-5);
  EXPECT_LT(r.max_relative_error, sizeof(Scalar) == 4 ? 1e-3 : 1e-6);
  EXPECT_EQ(r.coordinates, 20u);
  EXPECT_EQ(r.skipped, 0u);
}

TEST(GradCheck, FlagsAWrongGradient) {
  Tensor a = random_tensor({6}, 11);
  auto f = [](const std::vector<Tensor>& in) { return sum(square(in[0])); };
  auto grads = analytic_gradients(f, {a});
  grads[0][2] += 0.5;
  const auto r = compare_with_numeric(f, {a}, grads, 1e-3);
  EXPECT_GT(r.max_relative_error, 0.05);
  // The perturbed inputs are restored.
  auto fresh = random_tensor({6}, 11);
  EXPECT_EQ(values(a), values(fresh));
}

TEST(GradCheck, SkipsStencilsAcrossAKink) {
  // One element sits just above zero, within the stencil of relu's kink.
  Tensor a({3}, {Scalar(0.001), 1, -1});
  auto f = [](const std::vector<Tensor>& in) { return sum(relu(in[0])); };
  const auto r = finite_diff_check(f, {a}, 1.0 / 64);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_LT(r.max_relative_error, sizeof(Scalar) == 4 ? 1e-4 : 1e-9);
}

}  // namespace
