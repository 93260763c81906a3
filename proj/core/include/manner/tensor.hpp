#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "manner/memory.hpp"
#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

using Shape = std::vector<std::int64_t>;
using Buffer = std::vector<Scalar, TrackingAllocator<Scalar>>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  Buffer data;
  Buffer grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};

/// Dense row-major tensor. Copies share storage; tensors produced by ops are
/// never modified afterwards. Leaf tensors (parameters, buffers) may be
/// updated in place through mutable_data().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::span<const Scalar> values);
  Tensor(Shape shape, std::initializer_list<Scalar> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Scalar value);
  static Tensor scalar(Scalar value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  /// Size of one axis; negative axes count from the end.
  std::int64_t size(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const Scalar> data() const { return impl_->data; }
  std::span<Scalar> mutable_data() { return impl_->data; }
  Scalar item() const;
  Scalar at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);

  /// Accumulated gradient; zeros when nothing has flowed in yet.
  std::span<const Scalar> grad() const;
  std::span<Scalar> mutable_grad();
  void zero_grad();

  /// Fresh copy of the values with no gradient tracking.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

int normalize_axis(int axis, int rank);

}  // namespace MANNER_ABI_NS
}  // namespace manner
