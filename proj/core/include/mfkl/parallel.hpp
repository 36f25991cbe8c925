#pragma once

#include <cstddef>
#include <functional>

namespace mfkl {

// Number of worker threads: MFKL_THREADS if set to a positive integer,
// otherwise the hardware concurrency (at least 1).
int thread_count();

// Runs fn(i) for i in [0, n) across up to thread_count() threads.
// Work is split into contiguous static chunks, so writes to disjoint
// per-index slots are race-free and results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mfkl
