#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace plid {

/// Read-only view of a pairwise margin tensor stored as groups×groups×dim with
/// the feature dimension innermost. Class k reads group group_of[k]; an empty
/// group_of means classes are their own groups (dense layout).
struct MarginView {
	std::size_t classes = 0;
	std::size_t groups = 0;
	std::size_t dim = 0;
	const double *data = nullptr;
	std::span<const std::size_t> group_of{};

	std::size_t group(std::size_t k) const { return group_of.empty() ? k : group_of[k]; }
	const double *pair(std::size_t k, std::size_t y) const { return data + (group(k) * groups + group(y)) * dim; }
};

} // namespace plid
