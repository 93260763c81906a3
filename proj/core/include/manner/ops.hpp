#pragma once

#include <cstdint>
#include <vector>

#include "manner/autograd.hpp"
#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

// Differentiable primitives. Shapes are checked on every call; the only
// broadcasting is bias addition, scalar ops and the explicit mul_broadcast.

// ---- elementwise ----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// x * a where every axis of `a` either matches `x` or has size 1.
Tensor mul_broadcast(const Tensor& x, const Tensor& a);
Tensor scale(const Tensor& x, Scalar s);
Tensor add_scalar(const Tensor& x, Scalar s);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
/// sqrt with a zero subgradient at 0.
Tensor sqrt(const Tensor& x);
/// log(max(x, floor)); the gradient is zero where the clamp is active.
Tensor log_clamped(const Tensor& x, Scalar floor);

enum class Activation { kRelu, kSigmoid, kTanh };
Tensor activation(Activation kind, const Tensor& x);

/// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& x, int axis);

// ---- reductions -----------------------------------------------------------
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

enum class PoolKind { kAvg, kMax };
/// Reduces `axis` away. Max pooling routes the gradient to the first argmax.
Tensor pool(PoolKind kind, const Tensor& x, int axis);

// ---- layout ---------------------------------------------------------------
/// Same data, new shape. One dimension may be -1.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& order);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
/// Zero padding on the last axis.
Tensor pad_last(const Tensor& x, std::int64_t left, std::int64_t right);

// ---- linear algebra -------------------------------------------------------
/// Batched matrix product: [B,M,K] x [B,K,N] -> [B,M,N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[..., Din] * weight[Din, Dout] + bias[Dout]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---- convolution ----------------------------------------------------------
/// Cross-correlation. input [B,Cin,T], weight [Cout,Cin/groups,K], bias [Cout]
/// (may be undefined). Tout = (T + 2*padding - K) / stride + 1.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding,
              int groups = 1);
/// Adjoint of conv1d. input [B,Cin,T], weight [Cin,Cout,K].
/// Tout = (T - 1) * stride - 2 * padding + K.
Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding);

std::int64_t conv1d_output_length(std::int64_t length, int kernel, int stride, int padding);
std::int64_t conv_transpose1d_output_length(std::int64_t length, int kernel, int stride, int padding);

// ---- normalization --------------------------------------------------------
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  Scalar momentum = Scalar(0.1);
  Scalar eps = Scalar(1e-5);

  static BatchNormStats fresh(std::int64_t channels);
};

/// input [B,Ch,T]. Training mode normalizes with batch statistics over (B,T)
/// and updates `stats`; evaluation mode uses the running statistics.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training);

}  // namespace MANNER_ABI_NS
}  // namespace manner
