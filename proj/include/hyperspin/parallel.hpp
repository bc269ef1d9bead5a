#pragma once

#include <functional>

namespace hyperspin {

/// Number of worker threads to use for n independent items: hardware
/// concurrency, capped by the HYPERSPIN_THREADS environment variable and
/// by n itself.
int worker_thread_count(int n_items);

/// Run fn(0..n-1) across worker threads. Each index must write only to its
/// own output slot; callers reduce the slots in index order afterwards so
/// results do not depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace hyperspin
