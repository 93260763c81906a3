#include <algorithm>

#include "kernels.hpp"
#include "manner/errors.hpp"
#include "manner/ops.hpp"
#include "manner/parallel.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

using detail::grad_buffer;

struct Geometry {
  std::int64_t channels;
  std::int64_t length_in;
  std::int64_t length_out;
  int kernel;
  int stride;
  int padding;
};

// col[(c*K + k), t] = src[c, t*stride + k - padding], zero outside the signal.
void im2col(const Scalar* src, const Geometry& g, Scalar* col) {
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const Scalar* row = src + c * g.length_in;
    for (int k = 0; k < g.kernel; ++k) {
      Scalar* dst = col + (c * g.kernel + k) * g.length_out;
      for (std::int64_t t = 0; t < g.length_out; ++t) {
        const std::int64_t pos = t * g.stride + k - g.padding;
        dst[t] = (pos >= 0 && pos < g.length_in) ? row[pos] : Scalar{0};
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back onto dst[channels, length_in].
void col2im_add(const Scalar* col, const Geometry& g, Scalar* dst) {
  for (std::int64_t c = 0; c < g.channels; ++c) {
    Scalar* row = dst + c * g.length_in;
    for (int k = 0; k < g.kernel; ++k) {
      const Scalar* src = col + (c * g.kernel + k) * g.length_out;
      for (std::int64_t t = 0; t < g.length_out; ++t) {
        const std::int64_t pos = t * g.stride + k - g.padding;
        if (pos >= 0 && pos < g.length_in) row[pos] += src[t];
      }
    }
  }
}

// Valid output range [t0, t1) for which t*stride + k - padding lies inside
// the input.
std::pair<std::int64_t, std::int64_t> valid_range(const Geometry& g, int k) {
  const std::int64_t off = k - g.padding;
  std::int64_t t0 = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  std::int64_t last = g.length_in - 1 - off;  // t*stride <= last
  std::int64_t t1 = last < 0 ? 0 : std::min(g.length_out, last / g.stride + 1);
  return {t0, std::max(t0, t1)};
}

void depthwise_forward(const Scalar* x, const Scalar* w, const Geometry& g, Scalar* y) {
  std::fill(y, y + g.length_out, Scalar{0});
  for (int k = 0; k < g.kernel; ++k) {
    const auto [t0, t1] = valid_range(g, k);
    const Scalar wk = w[k];
    const std::int64_t off = k - g.padding;
    for (std::int64_t t = t0; t < t1; ++t) y[t] += wk * x[t * g.stride + off];
  }
}

void depthwise_backward(const Scalar* x, const Scalar* w, const Scalar* gy, const Geometry& g, Scalar* gx,
                        Scalar* gw) {
  for (int k = 0; k < g.kernel; ++k) {
    const auto [t0, t1] = valid_range(g, k);
    const std::int64_t off = k - g.padding;
    if (gw != nullptr) {
      Scalar acc = 0;
      for (std::int64_t t = t0; t < t1; ++t) acc += gy[t] * x[t * g.stride + off];
      gw[k] += acc;
    }
    if (gx != nullptr) {
      const Scalar wk = w[k];
      for (std::int64_t t = t0; t < t1; ++t) gx[t * g.stride + off] += wk * gy[t];
    }
  }
}

void check_bias(const Tensor& bias, std::int64_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.size(0) != channels)) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(bias.shape()) + " for " +
                     std::to_string(channels) + " output channels");
  }
}

void add_bias(const Tensor& bias, std::int64_t batch, std::int64_t channels, std::int64_t length, Scalar* out) {
  if (!bias.defined()) return;
  auto bs = bias.data();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      Scalar* row = out + (b * channels + c) * length;
      for (std::int64_t t = 0; t < length; ++t) row[t] += bs[c];
    }
  }
}

void bias_grad(TensorImpl* bias, const Buffer& gy, std::int64_t batch, std::int64_t channels, std::int64_t length) {
  if (bias == nullptr || !bias->requires_grad) return;
  auto& gb = grad_buffer(*bias);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const Scalar* row = gy.data() + (b * channels + c) * length;
      Scalar acc = 0;
      for (std::int64_t t = 0; t < length; ++t) acc += row[t];
      gb[c] += acc;
    }
  }
}

}  // namespace

std::int64_t conv1d_output_length(std::int64_t length, int kernel, int stride, int padding) {
  if (stride <= 0 || kernel <= 0 || padding < 0) throw ShapeError("conv1d: invalid kernel/stride/padding");
  const std::int64_t span = length + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

std::int64_t conv_transpose1d_output_length(std::int64_t length, int kernel, int stride, int padding) {
  if (stride <= 0 || kernel <= 0 || padding < 0) throw ShapeError("conv_transpose1d: invalid kernel/stride/padding");
  return (length - 1) * stride - 2 * padding + kernel;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding, int groups) {
  if (input.rank() != 3 || weight.rank() != 3) {
    throw ShapeError("conv1d: expected input [B,Cin,T] and weight [Cout,Cin/groups,K], got " +
                     to_string(input.shape()) + " and " + to_string(weight.shape()));
  }
  const auto batch = input.size(0), cin = input.size(1), length = input.size(2);
  const auto cout = weight.size(0), cin_g = weight.size(1);
  const int kernel = static_cast<int>(weight.size(2));
  if (groups <= 0 || cin % groups != 0 || cout % groups != 0 || cin_g * groups != cin) {
    throw ShapeError("conv1d: channels " + std::to_string(cin) + " / weight " + to_string(weight.shape()) +
                     " incompatible with groups=" + std::to_string(groups));
  }
  check_bias(bias, cout, "conv1d");
  const auto tout = conv1d_output_length(length, kernel, stride, padding);
  if (tout < 1) throw ShapeError("conv1d: non-positive output length for input " + to_string(input.shape()));

  const auto cout_g = cout / groups;
  const bool depthwise = cin_g == 1 && cout_g == 1;
  const bool pointwise = kernel == 1 && stride == 1 && padding == 0;
  const Geometry geo{cin_g, length, tout, kernel, stride, padding};

  Tensor out({batch, cout, tout});
  Scalar* o = out.mutable_data().data();
  const Scalar* x = input.data().data();
  const Scalar* w = weight.data().data();

  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    Buffer col;
    if (!depthwise && !pointwise) col.resize(static_cast<std::size_t>(cin_g * kernel * tout));
    for (std::int64_t b = b0; b < b1; ++b) {
      for (int g = 0; g < groups; ++g) {
        const Scalar* xg = x + (b * cin + g * cin_g) * length;
        const Scalar* wg = w + g * cout_g * cin_g * kernel;
        Scalar* yg = o + (b * cout + g * cout_g) * tout;
        if (depthwise) {
          depthwise_forward(xg, wg, geo, yg);
          continue;
        }
        const Scalar* cols = xg;
        if (!pointwise) {
          im2col(xg, geo, col.data());
          cols = col.data();
        }
        kernels::gemm(false, false, cout_g, tout, cin_g * kernel, wg, cols, yg, false);
      }
    }
  });
  add_bias(bias, batch, cout, tout, o);

  if (detail::should_record({&input, &weight, &bias})) {
    auto xi = input.impl(), wi = weight.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    detail::record(out, [=] {
      const Scalar* gy = oi->grad.data();
      Scalar* gx = xi->requires_grad ? grad_buffer(*xi).data() : nullptr;
      Scalar* gw = wi->requires_grad ? grad_buffer(*wi).data() : nullptr;
      Buffer col, dcol;
      if (!depthwise && !pointwise) {
        col.resize(static_cast<std::size_t>(cin_g * kernel * tout));
        dcol.resize(col.size());
      }
      for (std::int64_t b = 0; b < batch; ++b) {
        for (int g = 0; g < groups; ++g) {
          const Scalar* xg = xi->data.data() + (b * cin + g * cin_g) * length;
          const Scalar* wg = wi->data.data() + g * cout_g * cin_g * kernel;
          const Scalar* gyg = gy + (b * cout + g * cout_g) * tout;
          Scalar* gxg = gx ? gx + (b * cin + g * cin_g) * length : nullptr;
          Scalar* gwg = gw ? gw + g * cout_g * cin_g * kernel : nullptr;
          if (depthwise) {
            depthwise_backward(xg, wg, gyg, geo, gxg, gwg);
            continue;
          }
          if (pointwise) {
            if (gwg) kernels::gemm(false, true, cout_g, cin_g, tout, gyg, xg, gwg, true);
            if (gxg) kernels::gemm(true, false, cin_g, tout, cout_g, wg, gyg, gxg, true);
            continue;
          }
          if (gwg) {
            im2col(xg, geo, col.data());
            kernels::gemm(false, true, cout_g, cin_g * kernel, tout, gyg, col.data(), gwg, true);
          }
          if (gxg) {
            kernels::gemm(true, false, cin_g * kernel, tout, cout_g, wg, gyg, dcol.data(), false);
            col2im_add(dcol.data(), geo, gxg);
          }
        }
      }
      bias_grad(bi.get(), oi->grad, batch, cout, tout);
    });
  }
  return out;
}

Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  if (input.rank() != 3 || weight.rank() != 3 || weight.size(0) != input.size(1)) {
    throw ShapeError("conv_transpose1d: expected input [B,Cin,T] and weight [Cin,Cout,K], got " +
                     to_string(input.shape()) + " and " + to_string(weight.shape()));
  }
  const auto batch = input.size(0), cin = input.size(1), length = input.size(2);
  const auto cout = weight.size(1);
  const int kernel = static_cast<int>(weight.size(2));
  check_bias(bias, cout, "conv_transpose1d");
  const auto tout = conv_transpose1d_output_length(length, kernel, stride, padding);
  if (tout < 1) throw ShapeError("conv_transpose1d: non-positive output length");
  // The geometry of the forward convolution this op is the adjoint of.
  const Geometry geo{cout, tout, length, kernel, stride, padding};
  if (conv1d_output_length(tout, kernel, stride, padding) != length) {
    throw ShapeError("conv_transpose1d: inconsistent geometry");
  }

  Tensor out({batch, cout, tout});
  Scalar* o = out.mutable_data().data();
  const Scalar* x = input.data().data();
  const Scalar* w = weight.data().data();
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    Buffer col(static_cast<std::size_t>(cout * kernel * length));
    for (std::int64_t b = b0; b < b1; ++b) {
      kernels::gemm(true, false, cout * kernel, length, cin, w, x + b * cin * length, col.data(), false);
      col2im_add(col.data(), geo, o + b * cout * tout);
    }
  });
  add_bias(bias, batch, cout, tout, o);

  if (detail::should_record({&input, &weight, &bias})) {
    auto xi = input.impl(), wi = weight.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    detail::record(out, [=] {
      Buffer dcol(static_cast<std::size_t>(cout * kernel * length));
      for (std::int64_t b = 0; b < batch; ++b) {
        im2col(oi->grad.data() + b * cout * tout, geo, dcol.data());
        if (xi->requires_grad) {
          kernels::gemm(false, false, cin, length, cout * kernel, wi->data.data(), dcol.data(),
                        grad_buffer(*xi).data() + b * cin * length, true);
        }
        if (wi->requires_grad) {
          kernels::gemm(false, true, cin, cout * kernel, length, xi->data.data() + b * cin * length, dcol.data(),
                        grad_buffer(*wi).data(), true);
        }
      }
      bias_grad(bi.get(), oi->grad, batch, cout, tout);
    });
  }
  return out;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
