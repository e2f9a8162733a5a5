#pragma once

#include <cstddef>
#include <functional>

namespace mivs {

// Worker count used by parallel_for. Defaults to the hardware concurrency.
void set_thread_count(size_t n);
size_t thread_count();

// Runs fn(i) for i in [0, n). Calls made from inside a worker run serially,
// so nested loops never oversubscribe. The first exception (lowest index)
// is rethrown after all workers finish.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

} // namespace mivs
