#pragma once

#include <functional>

namespace polarseg {

// Worker count: POLARSEG_THREADS if set (clamped to >= 1), else hardware
// concurrency. Resolved once per process.
int max_threads();

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
// so results are identical for any worker count as long as fn writes only
// inside its range. Runs inline when a single worker suffices.
void parallel_for(long n, const std::function<void(long, long)>& fn);

}  // namespace polarseg
