#include "manner/memory.hpp"

#include <atomic>

namespace manner {
inline namespace MANNER_ABI_NS {
namespace memory {
namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};

}  // namespace

std::size_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
std::size_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }

void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed); }

void note_allocation(std::size_t bytes) {
  const std::size_t now = g_current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

void note_deallocation(std::size_t bytes) { g_current.fetch_sub(bytes, std::memory_order_relaxed); }

}  // namespace memory
}  // namespace MANNER_ABI_NS
}  // namespace manner
