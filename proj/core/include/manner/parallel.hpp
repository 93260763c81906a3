#pragma once

#include <cstdint>
#include <functional>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Intra-op thread cap. Defaults to the MANNER_THREADS environment variable,
/// or 1 when unset.
int num_threads();
void set_num_threads(int n);

/// Runs fn(begin, end) over disjoint contiguous slices of [0, n). Slices never
/// share output, so results do not depend on the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace MANNER_ABI_NS
}  // namespace manner
