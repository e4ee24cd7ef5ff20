#pragma once

#include <cstddef>
#include <functional>

namespace flowforge {

/// Worker count: FLOWFORGE_WORKERS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to `workers`
/// threads. Chunks are disjoint, so per-index work must be independent.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace flowforge
