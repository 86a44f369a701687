#pragma once

#include <cstddef>
#include <functional>

namespace hiermatch {

// Worker count from HIERMATCH_THREADS (0 or unset: hardware concurrency).
int worker_count();

// Calls fn(i) for i in [0, n) across worker_count() threads. The first
// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hiermatch
