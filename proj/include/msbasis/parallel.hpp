#pragma once

#include <functional>

namespace msbasis {

/// Number of worker threads: the process-wide cap when set, else
/// MSBASIS_THREADS when set, else the hardware concurrency, at least 1.
int worker_count();

/// Overrides the worker count for this process; 0 restores the default
/// resolution order. Used by the harness parallelism setting.
void set_worker_cap(int n);

/// Runs fn(0..n-1) across the worker pool. Each index is processed exactly
/// once; results written to disjoint slots are identical for any worker
/// count. The first exception thrown by a task is rethrown after all
/// workers finish.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace msbasis
