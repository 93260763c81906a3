#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "manner/tensor.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Define-by-run record of primitive applications. Ops append a node while a
/// tape is active on the calling thread and at least one input requires a
/// gradient; backward() replays the nodes in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::shared_ptr<TensorImpl> output, BackwardFn fn);
  std::size_t size() const { return nodes_.size(); }
  /// Drops every node and the intermediates they keep alive.
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;

  friend void backward(Tape& tape, const Tensor& loss);
};

/// Makes `tape` the recording tape of the current thread for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Propagates d(loss)/d(.) through every node of `tape`. Gradients accumulate
/// into leaves that require them; call zero_grad() between steps.
void backward(Tape& tape, const Tensor& loss);

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs);
/// Marks `out` as differentiable and appends its backward closure to the tape.
void record(Tensor& out, Tape::BackwardFn fn);
/// Gradient buffer of `t`, zero-allocated on first use.
Buffer& grad_buffer(TensorImpl& t);

}  // namespace detail

}  // namespace MANNER_ABI_NS
}  // namespace manner
