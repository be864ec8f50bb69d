#include "plid/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace plid {

std::size_t num_workers()
{
	const char *env = std::getenv("PLID_NUM_WORKERS");
	if (env == nullptr)
		return 1;
	const long v = std::strtol(env, nullptr, 10);
	return static_cast<std::size_t>(std::clamp(v, 1L, 64L));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn)
{
	const std::size_t workers = std::min(num_workers(), n);
	if (workers <= 1) {
		for (std::size_t i = 0; i < n; ++i)
			fn(i);
		return;
	}
	std::atomic<std::size_t> next{0};
	std::exception_ptr error;
	std::mutex error_mutex;
	std::vector<std::thread> pool;
	for (std::size_t w = 0; w < workers; ++w)
		pool.emplace_back([&] {
			for (std::size_t i = next++; i < n; i = next++) {
				try {
					fn(i);
				} catch (...) {
					std::lock_guard lock(error_mutex);
					if (!error)
						error = std::current_exception();
				}
			}
		});
	for (auto &t : pool)
		t.join();
	if (error)
		std::rethrow_exception(error);
}

} // namespace plid
