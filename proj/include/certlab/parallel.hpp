#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace certlab {

/// Process-wide cap on worker threads (set from the CLI --threads flag).
/// 0 means hardware concurrency.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Each index must write only to its own output
/// slot; results are then independent of scheduling, which keeps seeded runs
/// byte-reproducible.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace certlab
