#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace glean::numeric {

/// Runs fn(i) for i in [0, n), on OpenMP threads when `parallel` is set and OpenMP is
/// enabled. The first exception thrown by any call is rethrown after the loop.
void for_each_index(std::size_t n, bool parallel, const std::function<void(std::size_t)>& fn);

/// Threads used by parallel loops; 0 keeps the OpenMP default.
void set_thread_count(int threads);
int thread_count();

}  // namespace glean::numeric
