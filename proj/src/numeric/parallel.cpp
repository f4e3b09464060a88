#include "glean/numeric/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace glean::numeric {

void for_each_index(std::size_t n, bool parallel, const std::function<void(std::size_t)>& fn) {
  if (!parallel) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long s = 0; s < count; ++s) {
    try {
      fn(static_cast<std::size_t>(s));
    } catch (...) {
#pragma omp critical(glean_for_each_index)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace glean::numeric
