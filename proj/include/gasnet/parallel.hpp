#pragma once

#include <cstddef>
#include <functional>

namespace gasnet {

/// Worker count used when parallel_for is called with threads = 0.
void set_default_threads(int threads);
int default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index
/// runs exactly once; results written by index are deterministic. The
/// exception of the smallest failing index is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace gasnet
