#pragma once

#include <string>

#include "manner/ops.hpp"
#include "manner/parameter_tree.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

// Thin parameter holders around the primitives. Weights use fan-in scaled
// uniform initialization, biases start at zero.

struct Conv1d {
  Tensor weight;  // [Cout, Cin/groups, K]
  Tensor bias;    // [Cout]
  int stride = 1;
  int padding = 0;
  int groups = 1;

  static Conv1d create(ParamBuilder& b, const std::string& name, std::int64_t in_channels,
                       std::int64_t out_channels, int kernel, int stride = 1, int padding = 0, int groups = 1);
  /// Kernel-1 convolution, i.e. a position-wise linear map over channels.
  static Conv1d pointwise(ParamBuilder& b, const std::string& name, std::int64_t in_channels,
                          std::int64_t out_channels);

  Tensor forward(const Tensor& x) const { return conv1d(x, weight, bias, stride, padding, groups); }
};

struct ConvTranspose1d {
  Tensor weight;  // [Cin, Cout, K]
  Tensor bias;    // [Cout]
  int stride = 1;
  int padding = 0;

  static ConvTranspose1d create(ParamBuilder& b, const std::string& name, std::int64_t in_channels,
                                std::int64_t out_channels, int kernel, int stride, int padding);

  Tensor forward(const Tensor& x) const { return conv_transpose1d(x, weight, bias, stride, padding); }
};

struct Linear {
  Tensor weight;  // [Din, Dout]
  Tensor bias;    // [Dout]

  static Linear create(ParamBuilder& b, const std::string& name, std::int64_t in_features,
                       std::int64_t out_features);

  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
};

struct BatchNorm1d {
  Tensor gamma;
  Tensor beta;
  // Running statistics are shared handles into the parameter tree; only
  // training-mode calls write to them.
  mutable BatchNormStats stats;

  static BatchNorm1d create(ParamBuilder& b, const std::string& name, std::int64_t channels);

  Tensor forward(const Tensor& x, bool training) const { return batch_norm(x, gamma, beta, stats, training); }
};

/// relu(sigmoid(a(z)) * tanh(b(z))), the multiplicative gate used both as the
/// decoder's mask and as the attention block's residual gate. Values lie in
/// [0, 1).
Tensor gate(const Tensor& z, const Conv1d& sigmoid_branch, const Conv1d& tanh_branch);

}  // namespace MANNER_ABI_NS
}  // namespace manner
