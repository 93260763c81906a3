#include "manner/layers.hpp"

#include <cmath>

namespace manner {
inline namespace MANNER_ABI_NS {

Conv1d Conv1d::create(ParamBuilder& b, const std::string& name, std::int64_t in_channels,
                      std::int64_t out_channels, int kernel, int stride, int padding, int groups) {
  auto s = b.child(name);
  const double fan_in = static_cast<double>(in_channels / groups * kernel);
  Conv1d c;
  c.weight = s.uniform("weight", {out_channels, in_channels / groups, kernel}, 1.0 / std::sqrt(fan_in));
  c.bias = s.constant("bias", {out_channels}, 0);
  c.stride = stride;
  c.padding = padding;
  c.groups = groups;
  return c;
}

Conv1d Conv1d::pointwise(ParamBuilder& b, const std::string& name, std::int64_t in_channels,
                         std::int64_t out_channels) {
  return create(b, name, in_channels, out_channels, 1);
}

ConvTranspose1d ConvTranspose1d::create(ParamBuilder& b, const std::string& name, std::int64_t in_channels,
                                        std::int64_t out_channels, int kernel, int stride, int padding) {
  auto s = b.child(name);
  const double fan_in = static_cast<double>(out_channels * kernel);
  ConvTranspose1d c;
  c.weight = s.uniform("weight", {in_channels, out_channels, kernel}, 1.0 / std::sqrt(fan_in));
  c.bias = s.constant("bias", {out_channels}, 0);
  c.stride = stride;
  c.padding = padding;
  return c;
}

Linear Linear::create(ParamBuilder& b, const std::string& name, std::int64_t in_features,
                      std::int64_t out_features) {
  auto s = b.child(name);
  Linear l;
  l.weight = s.uniform("weight", {in_features, out_features}, 1.0 / std::sqrt(static_cast<double>(in_features)));
  l.bias = s.constant("bias", {out_features}, 0);
  return l;
}

BatchNorm1d BatchNorm1d::create(ParamBuilder& b, const std::string& name, std::int64_t channels) {
  auto s = b.child(name);
  BatchNorm1d n;
  n.gamma = s.constant("gamma", {channels}, 1);
  n.beta = s.constant("beta", {channels}, 0);
  n.stats.running_mean = s.buffer("running_mean", {channels}, 0);
  n.stats.running_var = s.buffer("running_var", {channels}, 1);
  return n;
}

Tensor gate(const Tensor& z, const Conv1d& sigmoid_branch, const Conv1d& tanh_branch) {
  return relu(mul(sigmoid(sigmoid_branch.forward(z)), tanh(tanh_branch.forward(z))));
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
