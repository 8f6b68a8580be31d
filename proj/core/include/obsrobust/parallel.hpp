#pragma once

#include <cstddef>
#include <functional>

namespace obsrobust {

/// Worker cap from OBSROBUST_THREADS (0 or unset means hardware concurrency).
std::size_t worker_count();

/// Runs fn(0..n-1) across workers. Tasks must write to disjoint slots;
/// results are then independent of the scheduling, so outputs stay
/// deterministic for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace obsrobust
