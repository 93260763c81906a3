#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace test {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& v : t.mutable_data()) v = static_cast<Scalar>(dist(rng));
  return t;
}

inline std::vector<Scalar> random_signal(std::int64_t n, std::uint64_t seed, double scale = 0.1) {
  std::vector<Scalar> out(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& v : out) v = static_cast<Scalar>(dist(rng));
  return out;
}

inline double max_abs_diff(std::span<const Scalar> a, std::span<const Scalar> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace test
}  // namespace MANNER_ABI_NS
}  // namespace manner
