#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace smd {

// Global worker cap. Default 1 so CI runs are trivially bitwise; the CLI sets
// it from --threads. All parallel paths are written so the result is
// bit-identical for any thread count.
void set_threads(int n);
int threads();

// fn(i) for i in [0, n). Falls back to a plain loop when already inside a
// parallel region. fn must not throw and results must not depend on
// execution order.
template <class F>
void parallel_for(long n, int nthreads, F&& fn) {
#ifdef _OPENMP
  if (nthreads > 1 && n > 1 && !omp_in_parallel()) {
#pragma omp parallel for num_threads(nthreads) schedule(dynamic)
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (long i = 0; i < n; ++i) fn(i);
}

inline bool in_parallel_region() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

}  // namespace smd
