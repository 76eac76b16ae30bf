#pragma once

#include <cstddef>
#include <functional>

namespace latefusion {

/// Runs body(i) for i in [0, count) on up to `workers` threads (0 = hardware
/// concurrency). Each index is visited exactly once; callers write results to
/// slot i so output never depends on scheduling. The first exception thrown
/// by any body is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace latefusion
