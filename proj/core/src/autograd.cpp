#include "manner/autograd.hpp"

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

thread_local Tape* t_active_tape = nullptr;

}  // namespace

void Tape::record(std::shared_ptr<TensorImpl> output, BackwardFn fn) {
  nodes_.push_back(Node{std::move(output), std::move(fn)});
}

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }

TapeScope::~TapeScope() { t_active_tape = previous_; }

Tape* active_tape() { return t_active_tape; }

void backward(Tape& tape, const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw Error("backward(): loss is not connected to any tensor that requires a gradient");
  }
  auto& seed = detail::grad_buffer(*loss.impl());
  seed[0] = Scalar{1};
  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // no path to the loss
    it->backward();
  }
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (t_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record(Tensor& out, Tape::BackwardFn fn) {
  out.set_requires_grad(true);
  t_active_tape->record(out.impl(), std::move(fn));
}

Buffer& grad_buffer(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), Scalar{0});
  return t.grad;
}

}  // namespace detail
}  // namespace MANNER_ABI_NS
}  // namespace manner
