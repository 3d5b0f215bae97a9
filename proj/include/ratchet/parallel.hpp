#pragma once

#include <cstddef>
#include <functional>

namespace ratchet {

// Number of hardware threads, at least 1.
int default_workers();

// Runs fn(index, worker) for index in [0, n) on up to `workers` threads.
// Indices are handed out in increasing order; the first exception thrown by
// any task is rethrown after all threads have joined.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, int)>& fn);

}  // namespace ratchet
