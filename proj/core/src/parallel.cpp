#include "manner/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

int threads_from_env() {
  if (const char* env = std::getenv("MANNER_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (...) {
    }
  }
  return 1;
}

std::atomic<int> g_threads{threads_from_env()};

}  // namespace

int num_threads() { return g_threads.load(); }

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  const std::int64_t workers = std::min<std::int64_t>(num_threads(), n);
  if (workers <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const std::int64_t block = (n + workers - 1) / workers;
  for (std::int64_t w = 1; w < workers; ++w) {
    const std::int64_t begin = w * block;
    const std::int64_t end = std::min(n, begin + block);
    if (begin < end) pool.emplace_back(fn, begin, end);
  }
  fn(0, std::min(n, block));
  for (auto& t : pool) t.join();
}

}  // namespace MANNER_ABI_NS
}  // namespace manner
