#pragma once

#include <cstdint>
#include <functional>

namespace dspec {

/// Runs fn(begin, end) over disjoint contiguous slices of [0, n).
/// Each slice is computed in its own fixed order, so results are bitwise
/// identical to the single-threaded run regardless of the worker count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

int num_threads();
void set_num_threads(int n);

} // namespace dspec
