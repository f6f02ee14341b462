#pragma once

#include <malloc.h>

namespace gridsizer {

// Autodiff tapes allocate and free many multi-megabyte buffers per step. With
// glibc's defaults each of them is a fresh mmap that gets page-faulted in and
// zeroed; keeping them on the heap roughly halves surrogate step time.
inline void tune_allocator() {
#ifdef M_MMAP_THRESHOLD
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace gridsizer
