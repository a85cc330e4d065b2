/// @file parallel.hpp
/// @brief OpenMP-parallel loop kernel with a serial reference path.
///
/// Exec{threads:1} runs the plain serial loop (the reference implementation
/// kept for testing); threads != 1 runs the OpenMP kernel. Loop bodies must
/// write results by index only, so both paths produce bit-identical output
/// and results never depend on scheduling.
#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#if defined(CHAINFORGE_HAVE_OPENMP)
#include <omp.h>
#endif

namespace cf {

struct Exec {
  int threads = 1;  ///< 1 = serial reference; 0 = hardware default; >1 = OpenMP
};

inline int resolve_threads(int requested) {
  if (requested == 1) return 1;
#if defined(CHAINFORGE_HAVE_OPENMP)
  if (requested <= 0) return omp_get_max_threads();
  return requested;
#else
  return 1;
#endif
}

/// Runs body(i) for i in [0,n). Exceptions thrown by the body are captured
/// (first one wins) and rethrown on the calling thread after the loop.
template <class F>
void parallel_for(std::size_t n, const Exec& ex, F&& body) {
  const int threads = resolve_threads(ex.threads);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#if defined(CHAINFORGE_HAVE_OPENMP)
  std::exception_ptr first_error = nullptr;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace cf
