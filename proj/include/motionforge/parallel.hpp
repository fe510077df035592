#pragma once

#include <cstddef>
#include <functional>

namespace motionforge {

/// Worker cap: MOTIONFORGE_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Each index must write disjoint outputs; callers
/// reduce results afterwards in index order so output is schedule-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace motionforge
