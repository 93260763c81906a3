#include "manner/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "manner/autograd.hpp"
#include "branch_trace.hpp"
#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

std::vector<std::vector<double>> analytic_gradients(const ScalarFunction& f, std::vector<Tensor> inputs) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = f(inputs);
    backward(tape, loss);
  }
  std::vector<std::vector<double>> grads;
  for (auto& t : inputs) {
    auto g = t.grad();
    grads.emplace_back(g.begin(), g.end());
  }
  return grads;
}

GradCheckResult compare_with_numeric(const ScalarFunction& f, std::vector<Tensor> inputs,
                                     const std::vector<std::vector<double>>& analytic, double eps) {
  if (analytic.size() != inputs.size()) throw Error("compare_with_numeric: gradient count mismatch");
  if (!(eps > 0)) throw Error("compare_with_numeric: eps must be positive");
  // A power-of-two step keeps x +- h and x +- 2h exactly representable.
  const double h = std::ldexp(1.0, std::ilogb(eps));
  GradCheckResult result;
  struct Tracing {
    bool previous = branch_trace::state.enabled;
    Tracing() { branch_trace::state.enabled = true; }
    ~Tracing() { branch_trace::state.enabled = previous; }
  } tracing;
  std::vector<double> worst_diff(inputs.size(), 0.0);
  double scale = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    if (analytic[k].size() != values.size()) throw Error("compare_with_numeric: gradient size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Scalar saved = values[i];
      std::uint64_t pattern = 0;
      bool crossed = false;
      const auto at = [&](double offset) {
        values[i] = static_cast<Scalar>(saved + offset);
        branch_trace::state.hash = 0xcbf29ce484222325ULL;
        const double v = f(inputs).item();
        crossed = crossed || branch_trace::state.hash != pattern;
        return v;
      };
      at(0);
      pattern = branch_trace::state.hash;
      crossed = false;
      // Fourth-order central stencil; the truncation error is O(h^4), which
      // leaves room for a step large enough to rise above 32-bit rounding.
      const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      values[i] = saved;
      if (crossed) {
        // A relu, abs, max or clamp changed sides inside the stencil: the
        // difference quotient is not a derivative estimate here.
        ++result.skipped;
        ++result.coordinates;
        continue;
      }
      worst_diff[k] = std::max(worst_diff[k], std::abs(numeric - analytic[k][i]));
      scale = std::max(scale, std::abs(numeric));
      ++result.coordinates;
    }
  }
  // Errors are measured against the largest gradient component of the whole
  // check: some inputs (a bias feeding batch norm, a key bias under softmax)
  // have an exactly zero gradient, for which a per-input ratio is undefined.
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const double err = worst_diff[k] / std::max(scale, 1e-12);
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_input = k;
    }
  }
  return result;
}

GradCheckResult finite_diff_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps) {
  auto grads = analytic_gradients(f, inputs);
  return compare_with_numeric(f, std::move(inputs), grads, eps);
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
