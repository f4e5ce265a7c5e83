#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace abm {

// Worker count for the parallel regions in this library. Every parallel
// loop assigns each output element (or each whole parameter slice) to
// exactly one thread and keeps the per-element accumulation order fixed,
// so results are bit-identical for any thread count, including 1.
inline int& thread_setting() {
  static int n = 0;  // 0 = library default (hardware concurrency)
  return n;
}

inline void set_threads(int n) {
  thread_setting() = n;
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

inline int effective_threads() {
#ifdef _OPENMP
  return thread_setting() > 0 ? thread_setting() : omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace abm
