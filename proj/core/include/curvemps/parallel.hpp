#pragma once

#include <cstddef>
#include <functional>

namespace curvemps {

// Worker cap for block-level parallelism: CURVEMPS_THREADS if set, otherwise
// the hardware concurrency. set_max_threads overrides both.
int max_threads();
void set_max_threads(int n);

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
// so callers that write disjoint outputs per index stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace curvemps
