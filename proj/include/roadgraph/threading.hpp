#pragma once

#include <cstddef>
#include <functional>

namespace roadgraph {

inline constexpr const char* kThreadsEnv = "ROADGRAPH_THREADS";

/// Worker count from ROADGRAPH_THREADS, else hardware concurrency (at least 1).
/// Throws std::invalid_argument on a malformed value.
int default_thread_count();

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results by index, so output order never
/// depends on scheduling. The first exception thrown by fn is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace roadgraph
