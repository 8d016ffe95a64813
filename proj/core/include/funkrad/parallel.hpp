#pragma once

#include <functional>

namespace funkrad {

/// Caps the worker-thread count for all parallel loops. 0 restores the
/// default (FUNKRAD_THREADS environment variable, else hardware concurrency).
void set_max_threads(int n);

/// Currently effective worker-thread count (>= 1).
int max_threads();

namespace detail {

/// Splits [begin, end) into contiguous chunks and runs body(lo, hi) on each,
/// possibly concurrently. Each index is handled by exactly one invocation, so
/// loops whose iterations write disjoint outputs stay deterministic.
void parallel_for(int begin, int end, const std::function<void(int, int)>& body);

}  // namespace detail
}  // namespace funkrad
