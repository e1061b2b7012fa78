#pragma once

#include <cstddef>
#include <functional>

namespace ctmsm {

// Worker count: `requested` when > 0, else $CTMSM_THREADS, else 1.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are
// claimed dynamically; the first exception thrown is rethrown after all
// workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace ctmsm
