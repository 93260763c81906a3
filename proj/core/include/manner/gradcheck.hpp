#pragma once

#include <functional>
#include <string>
#include <vector>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Scalar-valued function of a list of tensors, built from differentiable ops.
using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  /// max|analytic - numeric| over every coordinate, divided by the largest
  /// |numeric| component over every coordinate.
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  /// Coordinates left out because a relu, abs, max or clamp changed branch
  /// somewhere inside the difference stencil.
  std::size_t skipped = 0;
  /// Index of the input holding the worst coordinate.
  std::size_t worst_input = 0;
};

/// Finite-difference check of backward() for `f` at `inputs`, using a
/// fourth-order central stencil with step `eps` rounded down to a power of
/// two. The inputs are perturbed in place and restored.
GradCheckResult finite_diff_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps);

/// Same comparison against caller-supplied gradients (one per input), used to
/// make sure the checker itself flags wrong gradients.
GradCheckResult compare_with_numeric(const ScalarFunction& f, std::vector<Tensor> inputs,
                                     const std::vector<std::vector<double>>& analytic, double eps);

/// Backward-pass gradients of `f` for every input.
std::vector<std::vector<double>> analytic_gradients(const ScalarFunction& f, std::vector<Tensor> inputs);

}  // namespace MANNER_ABI_NS
}  // namespace manner
