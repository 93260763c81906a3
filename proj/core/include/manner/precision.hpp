#pragma once

// MANNER_DOUBLE selects the scalar type of the whole library. The 64-bit
// build exists for gradient verification; both builds can be linked into the
// same executable because every symbol sits in a precision-specific inline
// namespace.
#ifndef MANNER_DOUBLE
#define MANNER_DOUBLE 0
#endif

#if MANNER_DOUBLE
#define MANNER_ABI_NS f64
#else
#define MANNER_ABI_NS f32
#endif

namespace manner {
inline namespace MANNER_ABI_NS {

#if MANNER_DOUBLE
using Scalar = double;
#else
using Scalar = float;
#endif

}  // namespace MANNER_ABI_NS
}  // namespace manner
