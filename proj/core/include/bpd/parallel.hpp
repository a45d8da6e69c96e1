#pragma once

#include <cstddef>
#include <functional>

namespace bpd {

/// Process-wide cap on worker threads used by parallel_for (default 1).
void set_max_threads(int threads);
int max_threads();

/// Calls fn(i) for every i in [0, n), split into contiguous chunks over at
/// most max_threads() workers. fn must only write state owned by index i, so
/// results do not depend on the thread count. The first exception thrown by
/// any worker is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bpd
