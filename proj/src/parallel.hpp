#pragma once

#include <cstddef>
#include <functional>

namespace dode {

// Worker cap: DODE_THREADS when set, hardware concurrency otherwise.
unsigned worker_count();

// Runs fn(begin, end) over disjoint contiguous ranges of [0, n). Callers must
// write only to disjoint outputs; results are then independent of the worker
// count. Runs inline when n is small relative to `grain`.
void parallel_for(size_t n, size_t grain, const std::function<void(size_t, size_t)>& fn);

}  // namespace dode
