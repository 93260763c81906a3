#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace kernels {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

/// C[M,N] (+)= op(A) * op(B), all row-major and contiguous. op(A) is [M,K]:
/// A is stored [M,K], or [K,M] when trans_a. Likewise B is [K,N] or [N,K].
inline void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, const Scalar* a,
                 const Scalar* b, Scalar* c, bool accumulate) {
  MutMap cm(c, m, n);
  if (!accumulate) cm.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  if (!trans_a && !trans_b) {
    cm.noalias() += ConstMap(a, m, k) * ConstMap(b, k, n);
  } else if (trans_a && !trans_b) {
    cm.noalias() += ConstMap(a, k, m).transpose() * ConstMap(b, k, n);
  } else if (!trans_a && trans_b) {
    cm.noalias() += ConstMap(a, m, k) * ConstMap(b, n, k).transpose();
  } else {
    cm.noalias() += ConstMap(a, k, m).transpose() * ConstMap(b, n, k).transpose();
  }
}

}  // namespace kernels
}  // namespace MANNER_ABI_NS
}  // namespace manner
