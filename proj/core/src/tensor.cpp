#include "manner/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int normalize_axis(int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return a;
}

Tensor::Tensor(Shape shape) : impl_(std::make_shared<TensorImpl>()) {
  const auto n = manner::numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<std::size_t>(n), Scalar{0});
}

Tensor::Tensor(Shape shape, std::span<const Scalar> values) : Tensor(std::move(shape)) {
  if (values.size() != impl_->data.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     to_string(impl_->shape));
  }
  std::copy(values.begin(), values.end(), impl_->data.begin());
}

Tensor::Tensor(Shape shape, std::initializer_list<Scalar> values)
    : Tensor(std::move(shape), std::span<const Scalar>(values.begin(), values.size())) {}

Tensor Tensor::full(Shape shape, Scalar value) {
  Tensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::scalar(Scalar value) { return full({}, value); }

std::int64_t Tensor::size(int axis) const { return impl_->shape[normalize_axis(axis, rank())]; }

Scalar Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

Scalar Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) throw ShapeError("at(): index rank mismatch");
  std::int64_t offset = 0;
  int axis = 0;
  for (auto i : index) {
    const auto d = impl_->shape[axis++];
    if (i < 0 || i >= d) throw ShapeError("at(): index out of range");
    offset = offset * d + i;
  }
  return impl_->data[offset];
}

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

std::span<const Scalar> Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Scalar{0});
  return impl_->grad;
}

std::span<Scalar> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Scalar{0});
  return impl_->grad;
}

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), Scalar{0}); }

Tensor Tensor::detach() const { return Tensor(shape(), data()); }

}  // namespace MANNER_ABI_NS
}  // namespace manner
