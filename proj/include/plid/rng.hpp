#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace plid {

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Seeded engine with serializable state. Distributions are constructed per
/// draw so the engine state alone determines the stream.
class Rng {
public:
	explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

	double uniform();
	double normal(double mean = 0.0, double stddev = 1.0);
	double beta(double a, double b);
	std::uint64_t next() { return engine_(); }
	std::size_t index(std::size_t n);
	bool bernoulli(double p) { return uniform() < p; }

	std::mt19937_64 &engine() { return engine_; }

	std::string state() const;
	void set_state(const std::string &state);

	friend bool operator==(const Rng &a, const Rng &b) { return a.engine_ == b.engine_; }

private:
	std::mt19937_64 engine_;
};

} // namespace plid
