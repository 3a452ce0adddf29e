#pragma once

#include <cstddef>
#include <functional>

namespace qks {

/// Runs fn(0..n-1) on up to `threads` std::threads with static chunking.
/// threads <= 1 runs inline. The first worker exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Hardware concurrency clamped to [1, cap].
std::size_t default_threads(std::size_t cap = 4);

} // namespace qks
