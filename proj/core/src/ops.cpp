#include "manner/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "branch_trace.hpp"
#include "kernels.hpp"
#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

using detail::grad_buffer;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// (outer, n, inner) factorization of a shape around one axis.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t n = 1;
  std::int64_t inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::vector<std::int64_t> strides_of(const Shape& shape) {
  std::vector<std::int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

// Calls fn(linear_index, offset) for every element of `shape` in row-major
// order, where offset = sum(index[i] * strides[i]).
template <class Fn>
void walk(const Shape& shape, const std::vector<std::int64_t>& strides, Fn&& fn) {
  const int rank = static_cast<int>(shape.size());
  const std::int64_t total = numel(shape);
  if (total == 0) return;
  std::vector<std::int64_t> index(rank, 0);
  std::int64_t offset = 0;
  for (std::int64_t i = 0; i < total; ++i) {
    fn(i, offset);
    for (int d = rank - 1; d >= 0; --d) {
      if (++index[d] < shape[d]) {
        offset += strides[d];
        break;
      }
      offset -= strides[d] * (shape[d] - 1);
      index[d] = 0;
    }
  }
}

template <class F, class D>
Tensor unary(const Tensor& x, F f, D derivative) {
  Tensor out(x.shape());
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  if (detail::should_record({&x})) {
    auto xi = x.impl();
    auto oi = out.impl();
    detail::record(out, [xi, oi, derivative] {
      auto& gx = grad_buffer(*xi);
      const auto& g = oi->grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * derivative(xi->data[i], oi->data[i]);
    });
  }
  return out;
}

}  // namespace

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (detail::should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      for (auto* t : {ai.get(), bi.get()}) {
        if (!t->requires_grad) continue;
        auto& g = grad_buffer(*t);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  if (detail::should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      if (ai->requires_grad) {
        auto& g = grad_buffer(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
      }
      if (bi->requires_grad) {
        auto& g = grad_buffer(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (detail::should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      if (ai->requires_grad) {
        auto& g = grad_buffer(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        auto& g = grad_buffer(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * ai->data[i];
      }
    });
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] / y[i];
  if (detail::should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record(out, [ai, bi, oi] {
      if (ai->requires_grad) {
        auto& g = grad_buffer(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] / bi->data[i];
      }
      if (bi->requires_grad) {
        auto& g = grad_buffer(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i] * oi->data[i] / bi->data[i];
      }
    });
  }
  return out;
}

Tensor mul_broadcast(const Tensor& x, const Tensor& a) {
  if (a.rank() != x.rank()) {
    throw ShapeError("mul_broadcast: rank mismatch " + to_string(x.shape()) + " vs " + to_string(a.shape()));
  }
  auto a_strides = strides_of(a.shape());
  for (int d = 0; d < x.rank(); ++d) {
    if (a.shape()[d] == x.shape()[d]) continue;
    if (a.shape()[d] != 1) {
      throw ShapeError("mul_broadcast: cannot broadcast " + to_string(a.shape()) + " to " + to_string(x.shape()));
    }
    a_strides[d] = 0;
  }
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xs = x.data();
  auto as = a.data();
  walk(x.shape(), a_strides, [&](std::int64_t i, std::int64_t off) { o[i] = xs[i] * as[off]; });
  if (detail::should_record({&x, &a})) {
    auto xi = x.impl(), ai = a.impl(), oi = out.impl();
    detail::record(out, [xi, ai, oi, a_strides] {
      const auto& g = oi->grad;
      if (xi->requires_grad) {
        auto& gx = grad_buffer(*xi);
        walk(xi->shape, a_strides, [&](std::int64_t i, std::int64_t off) { gx[i] += g[i] * ai->data[off]; });
      }
      if (ai->requires_grad) {
        auto& ga = grad_buffer(*ai);
        walk(xi->shape, a_strides, [&](std::int64_t i, std::int64_t off) { ga[off] += g[i] * xi->data[i]; });
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, Scalar s) {
  return unary(x, [s](Scalar v) { return v * s; }, [s](Scalar, Scalar) { return s; });
}

Tensor add_scalar(const Tensor& x, Scalar s) {
  return unary(x, [s](Scalar v) { return v + s; }, [](Scalar, Scalar) { return Scalar{1}; });
}

Tensor relu(const Tensor& x) {
  branch_trace::note_each(x.data(), [](Scalar v) { return v > 0; });
  return unary(
      x, [](Scalar v) { return v > 0 ? v : Scalar{0}; }, [](Scalar v, Scalar) { return v > 0 ? Scalar{1} : Scalar{0}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](Scalar v) {
        if (v >= 0) return Scalar{1} / (Scalar{1} + std::exp(-v));
        const Scalar e = std::exp(v);
        return e / (Scalar{1} + e);
      },
      [](Scalar, Scalar y) { return y * (Scalar{1} - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](Scalar v) { return std::tanh(v); }, [](Scalar, Scalar y) { return Scalar{1} - y * y; });
}

Tensor abs(const Tensor& x) {
  branch_trace::note_each(x.data(), [](Scalar v) { return v > 0 ? 2 : (v < 0 ? 0 : 1); });
  return unary(
      x, [](Scalar v) { return std::abs(v); },
      [](Scalar v, Scalar) { return v > 0 ? Scalar{1} : (v < 0 ? Scalar{-1} : Scalar{0}); });
}

Tensor square(const Tensor& x) {
  return unary(x, [](Scalar v) { return v * v; }, [](Scalar v, Scalar) { return 2 * v; });
}

Tensor sqrt(const Tensor& x) {
  branch_trace::note_each(x.data(), [](Scalar v) { return v > 0; });
  return unary(
      x, [](Scalar v) { return std::sqrt(v); },
      [](Scalar, Scalar y) { return y > 0 ? Scalar{0.5} / y : Scalar{0}; });
}

Tensor log_clamped(const Tensor& x, Scalar floor) {
  branch_trace::note_each(x.data(), [floor](Scalar v) { return v > floor; });
  return unary(
      x, [floor](Scalar v) { return std::log(std::max(v, floor)); },
      [floor](Scalar v, Scalar) { return v > floor ? Scalar{1} / v : Scalar{0}; });
}

Tensor activation(Activation kind, const Tensor& x) {
  switch (kind) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kTanh:
      return tanh(x);
  }
  throw Error("unknown activation");
}

Tensor softmax(const Tensor& x, int axis) {
  const int ax = normalize_axis(axis, x.rank());
  const auto s = split_at(x.shape(), ax);
  Tensor out(x.shape());
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t j = 0; j < s.inner; ++j) {
      const std::int64_t base = o * s.n * s.inner + j;
      Scalar mx = -std::numeric_limits<Scalar>::infinity();
      for (std::int64_t i = 0; i < s.n; ++i) mx = std::max(mx, xs[base + i * s.inner]);
      Scalar total = 0;
      for (std::int64_t i = 0; i < s.n; ++i) {
        const Scalar e = std::exp(xs[base + i * s.inner] - mx);
        ys[base + i * s.inner] = e;
        total += e;
      }
      for (std::int64_t i = 0; i < s.n; ++i) ys[base + i * s.inner] /= total;
    }
  }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi, s] {
      auto& gx = grad_buffer(*xi);
      const auto& g = oi->grad;
      const auto& y = oi->data;
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.inner; ++j) {
          const std::int64_t base = o * s.n * s.inner + j;
          Scalar dot = 0;
          for (std::int64_t i = 0; i < s.n; ++i) dot += g[base + i * s.inner] * y[base + i * s.inner];
          for (std::int64_t i = 0; i < s.n; ++i) {
            const auto k = base + i * s.inner;
            gx[k] += y[k] * (g[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
  auto xs = x.data();
  const double total = std::accumulate(xs.begin(), xs.end(), 0.0);
  Tensor out = Tensor::scalar(static_cast<Scalar>(total));
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi] {
      auto& gx = grad_buffer(*xi);
      const Scalar g = oi->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), Scalar{1} / static_cast<Scalar>(x.numel()));
}

Tensor pool(PoolKind kind, const Tensor& x, int axis) {
  const int ax = normalize_axis(axis, x.rank());
  const auto s = split_at(x.shape(), ax);
  if (s.n == 0) throw ShapeError("pool over an empty axis");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + ax);
  Tensor out(out_shape);
  auto xs = x.data();
  auto ys = out.mutable_data();
  std::vector<std::int64_t> argmax;
  if (kind == PoolKind::kMax) argmax.resize(static_cast<std::size_t>(s.outer * s.inner));
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t j = 0; j < s.inner; ++j) {
      const std::int64_t base = o * s.n * s.inner + j;
      const std::int64_t dst = o * s.inner + j;
      if (kind == PoolKind::kAvg) {
        Scalar total = 0;
        for (std::int64_t i = 0; i < s.n; ++i) total += xs[base + i * s.inner];
        ys[dst] = total / static_cast<Scalar>(s.n);
      } else {
        std::int64_t best = 0;
        for (std::int64_t i = 1; i < s.n; ++i) {
          if (xs[base + i * s.inner] > xs[base + best * s.inner]) best = i;
        }
        argmax[dst] = best;
        if (branch_trace::enabled()) branch_trace::note(static_cast<std::uint64_t>(best));
        ys[dst] = xs[base + best * s.inner];
      }
    }
  }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi, s, kind, argmax = std::move(argmax)] {
      auto& gx = grad_buffer(*xi);
      const auto& g = oi->grad;
      const Scalar inv = Scalar{1} / static_cast<Scalar>(s.n);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.inner; ++j) {
          const std::int64_t base = o * s.n * s.inner + j;
          const std::int64_t dst = o * s.inner + j;
          if (kind == PoolKind::kAvg) {
            for (std::int64_t i = 0; i < s.n; ++i) gx[base + i * s.inner] += g[dst] * inv;
          } else {
            gx[base + argmax[dst] * s.inner] += g[dst];
          }
        }
      }
    });
  }
  return out;
}

// ---- layout ---------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  int infer = -1;
  std::int64_t known = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0) throw ShapeError("reshape: cannot infer dimension");
    shape[infer] = x.numel() / known;
  }
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  Tensor out(shape, x.data());
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi] {
      auto& gx = grad_buffer(*xi);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += oi->grad[i];
    });
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& order) {
  const int rank = x.rank();
  if (static_cast<int>(order.size()) != rank) throw ShapeError("permute: order rank mismatch");
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  const auto in_strides = strides_of(x.shape());
  std::vector<std::int64_t> src_strides(rank);
  for (int d = 0; d < rank; ++d) {
    const int s = normalize_axis(order[d], rank);
    if (seen[s]) throw ShapeError("permute: repeated axis");
    seen[s] = true;
    out_shape[d] = x.shape()[s];
    src_strides[d] = in_strides[s];
  }
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xs = x.data();
  walk(out_shape, src_strides, [&](std::int64_t i, std::int64_t off) { o[i] = xs[off]; });
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi, src_strides] {
      auto& gx = grad_buffer(*xi);
      walk(oi->shape, src_strides, [&](std::int64_t i, std::int64_t off) { gx[off] += oi->grad[i]; });
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const int ax = normalize_axis(axis, parts[0].rank());
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank()) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < p.rank(); ++d) {
      if (d != ax && p.shape()[d] != parts[0].shape()[d]) {
        throw ShapeError("concat: shape mismatch " + to_string(p.shape()) + " vs " + to_string(parts[0].shape()));
      }
    }
    out_shape[ax] += p.shape()[ax];
  }
  const auto outer_split = split_at(out_shape, ax);
  Tensor out(out_shape);
  auto o = out.mutable_data();
  std::int64_t offset = 0;  // running offset along the axis, in elements of one outer row
  std::vector<std::int64_t> offsets;
  for (const auto& p : parts) {
    const std::int64_t block = p.shape()[ax] * outer_split.inner;
    offsets.push_back(offset);
    auto ps = p.data();
    for (std::int64_t r = 0; r < outer_split.outer; ++r) {
      std::copy_n(ps.begin() + r * block, block, o.begin() + r * outer_split.n * outer_split.inner + offset);
    }
    offset += block;
  }
  bool any = false;
  for (const auto& p : parts) any = any || detail::should_record({&p});
  if (any) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    auto oi = out.impl();
    detail::record(out, [impls, oi, offsets, outer_split, ax] {
      for (std::size_t k = 0; k < impls.size(); ++k) {
        auto& t = *impls[k];
        if (!t.requires_grad) continue;
        auto& g = grad_buffer(t);
        const std::int64_t block = t.shape[ax] * outer_split.inner;
        for (std::int64_t r = 0; r < outer_split.outer; ++r) {
          const auto* src = oi->grad.data() + r * outer_split.n * outer_split.inner + offsets[k];
          auto* dst = g.data() + r * block;
          for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis(axis, x.rank());
  if (start < 0 || length < 0 || start + length > x.shape()[ax]) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") out of range for " +
                     to_string(x.shape()));
  }
  const auto s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xs = x.data();
  const std::int64_t block = length * s.inner;
  for (std::int64_t r = 0; r < s.outer; ++r) {
    std::copy_n(xs.begin() + r * s.n * s.inner + start * s.inner, block, o.begin() + r * block);
  }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi, s, start, block] {
      auto& gx = grad_buffer(*xi);
      for (std::int64_t r = 0; r < s.outer; ++r) {
        auto* dst = gx.data() + r * s.n * s.inner + start * s.inner;
        const auto* src = oi->grad.data() + r * block;
        for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor pad_last(const Tensor& x, std::int64_t left, std::int64_t right) {
  if (left < 0 || right < 0) throw ShapeError("pad_last: negative padding");
  const std::int64_t t = x.shape().back();
  const std::int64_t rows = t == 0 ? 0 : x.numel() / t;
  Shape out_shape = x.shape();
  out_shape.back() = t + left + right;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xs = x.data();
  const std::int64_t width = out_shape.back();
  for (std::int64_t r = 0; r < rows; ++r) std::copy_n(xs.begin() + r * t, t, o.begin() + r * width + left);
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(out, [xi, oi, rows, t, width, left] {
      auto& gx = grad_buffer(*xi);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t i = 0; i < t; ++i) gx[r * t + i] += oi->grad[r * width + left + i];
      }
    });
  }
  return out;
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.size(0) != b.size(0) || a.size(2) != b.size(1)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const auto batch = a.size(0), m = a.size(1), k = a.size(2), n = b.size(2);
  Tensor out({batch, m, n});
  auto o = out.mutable_data();
  for (std::int64_t i = 0; i < batch; ++i) {
    kernels::gemm(false, false, m, n, k, a.data().data() + i * m * k, b.data().data() + i * k * n,
                  o.data() + i * m * n, false);
  }
  if (detail::should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record(out, [ai, bi, oi, batch, m, k, n] {
      for (std::int64_t i = 0; i < batch; ++i) {
        const Scalar* g = oi->grad.data() + i * m * n;
        if (ai->requires_grad) {
          kernels::gemm(false, true, m, k, n, g, bi->data.data() + i * k * n, grad_buffer(*ai).data() + i * m * k,
                        true);
        }
        if (bi->requires_grad) {
          kernels::gemm(true, false, k, n, m, ai->data.data() + i * m * k, g, grad_buffer(*bi).data() + i * k * n,
                        true);
        }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.size(0)) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  const auto din = weight.size(0), dout = weight.size(1);
  if (bias.defined() && (bias.rank() != 1 || bias.size(0) != dout)) {
    throw ShapeError("linear: bias shape " + to_string(bias.shape()));
  }
  const auto rows = x.numel() / std::max<std::int64_t>(din, 1);
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  kernels::gemm(false, false, rows, dout, din, x.data().data(), weight.data().data(), o.data(), false);
  if (bias.defined()) {
    auto bs = bias.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t j = 0; j < dout; ++j) o[r * dout + j] += bs[j];
    }
  }
  if (detail::should_record({&x, &weight, &bias})) {
    auto xi = x.impl(), wi = weight.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    detail::record(out, [xi, wi, bi, oi, rows, din, dout] {
      const Scalar* g = oi->grad.data();
      if (xi->requires_grad) kernels::gemm(false, true, rows, din, dout, g, wi->data.data(), grad_buffer(*xi).data(), true);
      if (wi->requires_grad) kernels::gemm(true, false, din, dout, rows, xi->data.data(), g, grad_buffer(*wi).data(), true);
      if (bi && bi->requires_grad) {
        auto& gb = grad_buffer(*bi);
        for (std::int64_t r = 0; r < rows; ++r) {
          for (std::int64_t j = 0; j < dout; ++j) gb[j] += g[r * dout + j];
        }
      }
    });
  }
  return out;
}

// ---- normalization --------------------------------------------------------

BatchNormStats BatchNormStats::fresh(std::int64_t channels) {
  return BatchNormStats{Tensor::zeros({channels}), Tensor::full({channels}, Scalar{1})};
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training) {
  if (input.rank() != 3) throw ShapeError("batch_norm: expected [B,Ch,T], got " + to_string(input.shape()));
  const auto batch = input.size(0), channels = input.size(1), length = input.size(2);
  const Tensor* checked[] = {&gamma, &beta, &stats.running_mean, &stats.running_var};
  for (const Tensor* t : checked) {
    if (t->rank() != 1 || t->size(0) != channels) {
      throw ShapeError("batch_norm: parameter shape " + to_string(t->shape()) + " for " + std::to_string(channels) +
                       " channels");
    }
  }
  const std::int64_t count = batch * length;
  if (training && count == 0) throw ShapeError("batch_norm: empty batch");

  Buffer mean_used(channels), inv_std(channels);
  auto xs = input.data();
  if (training) {
    auto rm = stats.running_mean.mutable_data();
    auto rv = stats.running_var.mutable_data();
    for (std::int64_t c = 0; c < channels; ++c) {
      double total = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const Scalar* row = xs.data() + (b * channels + c) * length;
        for (std::int64_t t = 0; t < length; ++t) total += row[t];
      }
      const double mu = total / static_cast<double>(count);
      double sq = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const Scalar* row = xs.data() + (b * channels + c) * length;
        for (std::int64_t t = 0; t < length; ++t) sq += (row[t] - mu) * (row[t] - mu);
      }
      const double var = sq / static_cast<double>(count);
      mean_used[c] = static_cast<Scalar>(mu);
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + stats.eps));
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      rm[c] = (1 - stats.momentum) * rm[c] + stats.momentum * static_cast<Scalar>(mu);
      rv[c] = (1 - stats.momentum) * rv[c] + stats.momentum * static_cast<Scalar>(unbiased);
    }
  } else {
    auto rm = stats.running_mean.data();
    auto rv = stats.running_var.data();
    for (std::int64_t c = 0; c < channels; ++c) {
      mean_used[c] = rm[c];
      inv_std[c] = Scalar{1} / std::sqrt(rv[c] + stats.eps);
    }
  }

  Tensor out(input.shape());
  auto o = out.mutable_data();
  auto gs = gamma.data();
  auto bs = beta.data();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const auto base = (b * channels + c) * length;
      const Scalar k = gs[c] * inv_std[c];
      const Scalar shift = bs[c] - mean_used[c] * k;
      for (std::int64_t t = 0; t < length; ++t) o[base + t] = xs[base + t] * k + shift;
    }
  }

  if (detail::should_record({&input, &gamma, &beta})) {
    auto xi = input.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    detail::record(out, [xi, gi, bi, oi, mean_used = std::move(mean_used), inv_std = std::move(inv_std), batch,
                         channels, length, count, training] {
      const auto& g = oi->grad;
      const auto& x = xi->data;
      for (std::int64_t c = 0; c < channels; ++c) {
        double sum_g = 0, sum_gx = 0;
        for (std::int64_t b = 0; b < batch; ++b) {
          const auto base = (b * channels + c) * length;
          for (std::int64_t t = 0; t < length; ++t) {
            const double xhat = (x[base + t] - mean_used[c]) * inv_std[c];
            sum_g += g[base + t];
            sum_gx += g[base + t] * xhat;
          }
        }
        if (gi->requires_grad) grad_buffer(*gi)[c] += static_cast<Scalar>(sum_gx);
        if (bi->requires_grad) grad_buffer(*bi)[c] += static_cast<Scalar>(sum_g);
        if (!xi->requires_grad) continue;
        auto& gx = grad_buffer(*xi);
        const Scalar k = gi->data[c] * inv_std[c];
        if (training) {
          const double mg = sum_g / count, mgx = sum_gx / count;
          for (std::int64_t b = 0; b < batch; ++b) {
            const auto base = (b * channels + c) * length;
            for (std::int64_t t = 0; t < length; ++t) {
              const double xhat = (x[base + t] - mean_used[c]) * inv_std[c];
              gx[base + t] += static_cast<Scalar>(k * (g[base + t] - mg - xhat * mgx));
            }
          }
        } else {
          for (std::int64_t b = 0; b < batch; ++b) {
            const auto base = (b * channels + c) * length;
            for (std::int64_t t = 0; t < length; ++t) gx[base + t] += k * g[base + t];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
