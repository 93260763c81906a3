#pragma once

// Finite-difference checks of every differentiable block at toy sizes. The
// suite source is compiled once per precision; the declarations use only
// standard types so both versions can be called from one executable.

#include <cstddef>
#include <string>
#include <vector>

namespace manner::gradsuite {

struct Outcome {
  std::string name;
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::size_t worst_input = 0;
  std::size_t skipped = 0;  // stencils that crossed a kink
};

/// Tolerances: 1e-3 for 32-bit and 1e-6 for 64-bit scalars.
inline constexpr double kTolerance32 = 1e-3;
inline constexpr double kTolerance64 = 1e-6;
/// Largest share of coordinates whose stencil may cross a kink before a
/// check is considered uninformative.
inline constexpr double kMaxSkippedFraction = 0.25;

std::vector<Outcome> run_f32();
std::vector<Outcome> run_f64();

}  // namespace manner::gradsuite
