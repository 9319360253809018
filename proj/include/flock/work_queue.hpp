#pragma once

#include <cstddef>
#include <functional>

namespace flock {

/// Number of worker threads used by default; honors FLOCK_THREADS.
std::size_t default_workers();

/// Runs job(i) for i in [0, count) on up to `workers` threads. Each index
/// runs exactly once; results must be written to per-index slots. The first
/// exception thrown by any job is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job,
                  std::size_t workers = 0);

}  // namespace flock
