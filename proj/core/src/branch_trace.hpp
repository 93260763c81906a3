#pragma once

// Branch-pattern fingerprint for the finite-difference checker. Ops with a
// non-differentiable point (relu, abs, max pooling, clamps) fold the side
// taken by every element into a per-thread hash while tracing is enabled, so
// the checker can tell when a perturbation crossed a kink.

#include <cstdint>
#include <span>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace branch_trace {

struct State {
  bool enabled = false;
  std::uint64_t hash = 0xcbf29ce484222325ULL;
};

inline thread_local State state;

inline bool enabled() { return state.enabled; }

inline void note(std::uint64_t value) {
  state.hash = (state.hash ^ (value + 0x9E3779B97F4A7C15ULL)) * 0x100000001B3ULL;
}

template <class Side>
void note_each(std::span<const Scalar> values, Side side) {
  if (!state.enabled) return;
  for (Scalar v : values) note(static_cast<std::uint64_t>(side(v)));
}

}  // namespace branch_trace
}  // namespace MANNER_ABI_NS
}  // namespace manner
