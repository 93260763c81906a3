#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "manner/model.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

struct BenchRow {
  double length_s = 0;
  double median_ms = 0;
  std::size_t peak_bytes = 0;  // tensor-allocator high-water mark during a forward pass
  std::vector<double> samples_ms;
};

struct BenchReport {
  std::string label;
  std::vector<BenchRow> rows;
};

struct BenchOptions {
  std::vector<double> lengths_s = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int runs = 5;     // timed forward passes per length, at least 5
  int warmup = 1;   // untimed passes per length
  std::uint64_t seed = 0;  // input signal generator
};

/// Times single-threaded inference of `model` on a [1,1,T] noise signal for
/// every requested length. Throws ConfigError unless lengths are positive and
/// strictly increasing and runs >= 5.
BenchReport run_bench(const MannerModel& model, const BenchOptions& options, std::string label = {});

/// "length_s,median_ms,peak_bytes" followed by one row per length.
std::string bench_csv(const BenchReport& report);
/// Aligned table; with two reports the columns are shown side by side.
std::string bench_table(const std::vector<BenchReport>& reports);

/// Parses "1,2,5" into lengths in seconds.
std::vector<double> parse_lengths(const std::string& csv);

}  // namespace MANNER_ABI_NS
}  // namespace manner
