#include "plid/rng.hpp"

#include <cstdio>
#include <sstream>

#include "plid/errors.hpp"

namespace plid {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed)
{
	std::uint64_t h = seed;
	for (unsigned char c : bytes) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	return h;
}

std::string hex64(std::uint64_t v)
{
	char buf[17];
	std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
	return buf;
}

double Rng::uniform()
{
	return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double Rng::normal(double mean, double stddev)
{
	return std::normal_distribution<double>(mean, stddev)(engine_);
}

double Rng::beta(double a, double b)
{
	const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
	const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
	return x / (x + y);
}

std::size_t Rng::index(std::size_t n)
{
	return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

std::string Rng::state() const
{
	std::ostringstream os;
	os << engine_;
	return os.str();
}

void Rng::set_state(const std::string &state)
{
	std::istringstream is(state);
	is >> engine_;
	if (!is)
		throw ValidationError("malformed rng state");
}

} // namespace plid
