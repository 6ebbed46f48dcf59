#pragma once

#include <cstddef>
#include <functional>

namespace erta {

// Index-sharded parallel map. fn(i) runs for every i in [0, count); results
// must be written to pre-sized slots so ordering stays deterministic
// regardless of the worker count. workers <= 1 runs inline. The first
// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace erta
