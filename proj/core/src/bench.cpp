#include "manner/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "manner/audio.hpp"
#include "manner/errors.hpp"
#include "manner/memory.hpp"
#include "manner/parallel.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

class ThreadCap {
 public:
  ThreadCap() : saved_(num_threads()) { set_num_threads(1); }
  ~ThreadCap() { set_num_threads(saved_); }

 private:
  int saved_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchReport run_bench(const MannerModel& model, const BenchOptions& options, std::string label) {
  if (options.runs < 5) throw ConfigError("bench: at least 5 timed runs are required");
  if (options.warmup < 0) throw ConfigError("bench: warmup must be >= 0");
  if (options.lengths_s.empty()) throw ConfigError("bench: no lengths given");
  for (std::size_t i = 0; i < options.lengths_s.size(); ++i) {
    if (!(options.lengths_s[i] > 0) || (i > 0 && options.lengths_s[i] <= options.lengths_s[i - 1])) {
      throw ConfigError("bench: lengths must be positive and strictly increasing");
    }
  }
  ThreadCap single_thread;
  BenchReport report;
  report.label = label.empty() ? to_string(model.config().variant) : std::move(label);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (double seconds : options.lengths_s) {
    const auto length = std::llround(seconds * kSampleRate);
    Tensor input({1, 1, length});
    for (auto& v : input.mutable_data()) v = static_cast<Scalar>(noise(rng));

    for (int i = 0; i < options.warmup; ++i) model.forward(input, false);
    BenchRow row;
    row.length_s = seconds;
    for (int i = 0; i < options.runs; ++i) {
      memory::reset_peak();
      const std::size_t before = memory::current_bytes();
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor out = model.forward(input, false);
      const auto t1 = std::chrono::steady_clock::now();
      row.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      row.peak_bytes = std::max(row.peak_bytes, memory::peak_bytes() - before);
    }
    row.median_ms = median(row.samples_ms);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::ostringstream os;
  os << "length_s,median_ms,peak_bytes\n";
  for (const auto& r : report.rows) {
    os << r.length_s << ',' << std::fixed << std::setprecision(3) << r.median_ms << std::defaultfloat << ','
       << r.peak_bytes << '\n';
  }
  return os.str();
}

std::string bench_table(const std::vector<BenchReport>& reports) {
  std::ostringstream os;
  os << std::setw(10) << "length [s]";
  for (const auto& rep : reports) {
    os << " | " << std::setw(14) << (rep.label + " ms") << ' ' << std::setw(12) << "peak MiB";
  }
  os << '\n';
  const std::size_t rows = reports.empty() ? 0 : reports.front().rows.size();
  for (std::size_t i = 0; i < rows; ++i) {
    os << std::setw(10) << reports.front().rows[i].length_s;
    for (const auto& rep : reports) {
      if (i >= rep.rows.size()) continue;
      const auto& r = rep.rows[i];
      os << " | " << std::setw(14) << std::fixed << std::setprecision(2) << r.median_ms << ' ' << std::setw(12)
         << static_cast<double>(r.peak_bytes) / (1024.0 * 1024.0) << std::defaultfloat;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<double> parse_lengths(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad length '" + item + "' in '" + csv + "'");
    }
  }
  if (out.empty()) throw ConfigError("no lengths in '" + csv + "'");
  return out;
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
