#pragma once

#include <cstddef>
#include <functional>

namespace kolmo {

/// Worker count: KOLMO_THREADS if set and positive, else the hardware count.
int thread_count();

/// Runs fn(i) for i in [0, n) over a static partition. The first exception
/// thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace kolmo
