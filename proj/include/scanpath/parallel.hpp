#pragma once

#include <cstddef>
#include <functional>

namespace scanpath {

/// Thread cap for every parallel section. Initialised from SCANPATH_THREADS
/// if set, otherwise hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// callers write into preallocated slots, so results never depend on the
/// number of threads. Calls nested inside a parallel region run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace scanpath
