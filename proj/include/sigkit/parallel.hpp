#pragma once

#include <cstdint>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sigkit {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs body(i) for i in [0, n). n_threads <= 0 means "all available".
//
// Contract: each iteration writes only to its own per-index slot and draws
// randomness only from a substream derived from i, so the output is
// bit-identical for every thread count and schedule. Serial execution
// (n_threads == 1, or a build without OpenMP) is the reference the parallel
// path is tested against.
template <class F>
void parallel_for(std::int64_t n, int n_threads, F&& body) {
  if (n <= 0) return;
#ifdef _OPENMP
  const int threads = n_threads <= 0 ? omp_get_max_threads() : n_threads;
  if (threads > 1) {
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
#pragma omp critical(sigkit_parallel_for_err)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#else
  (void)n_threads;
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace sigkit
