#pragma once

#include <span>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

/// Ceiling applied to reported SI-SNR values, in dB.
inline constexpr double kSiSnrCeiling = 60.0;

/// Scale-invariant SNR of `estimate` against `reference`, in dB, computed
/// after removing each signal's mean. Capped at kSiSnrCeiling; a silent
/// reference or an estimate orthogonal to it gives -kSiSnrCeiling.
double si_snr(std::span<const Scalar> reference, std::span<const Scalar> estimate);

}  // namespace MANNER_ABI_NS
}  // namespace manner
