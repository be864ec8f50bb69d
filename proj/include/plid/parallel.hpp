#pragma once

#include <cstddef>
#include <functional>

namespace plid {

/// Worker count from PLID_NUM_WORKERS (default 1, clamped to [1, 64]).
std::size_t num_workers();

/// Runs fn(i) for i in [0, n) on up to num_workers() threads. Each index runs
/// exactly once; fn must only write state owned by its index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn);

} // namespace plid
