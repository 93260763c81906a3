#pragma once

#include <cstddef>
#include <memory>

#include "manner/precision.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace memory {

// Byte counters for every buffer allocated through TrackingAllocator. The
// benchmark reads the high-water mark instead of OS-level RSS.
std::size_t current_bytes();
std::size_t peak_bytes();
/// Resets the high-water mark to the current live byte count.
void reset_peak();

void note_allocation(std::size_t bytes);
void note_deallocation(std::size_t bytes);

}  // namespace memory

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    memory::note_allocation(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::note_deallocation(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace MANNER_ABI_NS
}  // namespace manner
