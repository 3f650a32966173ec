#pragma once

#include <cstddef>
#include <functional>

namespace apgauge {

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Callers write into per-index slots, so the reduction order
// stays deterministic. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

int default_threads();
void set_default_threads(int n);

}  // namespace apgauge
