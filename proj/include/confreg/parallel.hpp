#pragma once

#include <cstddef>
#include <functional>

namespace confreg {

// Worker count: CONFREG_THREADS if set, else all hardware threads.
int default_thread_count();

// Runs fn(index, worker) for index in [0, count) on up to `threads` workers.
// Indices are handed out dynamically; worker ids lie in [0, threads).
// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t index, int worker)>& fn);

} // namespace confreg
