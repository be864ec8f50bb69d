#pragma once

// Shared helpers for the unit and acceptance tests: seeded generators,
// independent reference implementations and small fixtures.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "plid/config.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/matrix.hpp"

namespace support {

/// Hand-rolled generator over std::mt19937_64.
class Gen {
public:
	explicit Gen(std::uint64_t seed) : eng_(seed) {}

	double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng_); }
	double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
	std::size_t size(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_); }
	bool coin() { return size(0, 1) == 1; }

	plid::Matrix matrix(std::size_t r, std::size_t c, double sd = 1.0)
	{
		plid::Matrix m(r, c);
		for (auto &x : m.values())
			x = normal(sd);
		return m;
	}
	std::vector<double> vec(std::size_t n, double sd = 1.0)
	{
		std::vector<double> v(n);
		for (auto &x : v)
			x = normal(sd);
		return v;
	}
	std::vector<double> unit(std::size_t n)
	{
		auto v = vec(n);
		double s = 0.0;
		for (double x : v)
			s += x * x;
		for (auto &x : v)
			x /= std::sqrt(s);
		return v;
	}
	plid::Matrix unit_rows(std::size_t r, std::size_t c)
	{
		plid::Matrix m(r, c);
		for (std::size_t i = 0; i < r; ++i) {
			auto u = unit(c);
			std::copy(u.begin(), u.end(), m.row(i).begin());
		}
		return m;
	}
	std::mt19937_64 &engine() { return eng_; }

private:
	std::mt19937_64 eng_;
};

/// Plain-loop helpers used as oracles.
inline double ref_dot(const std::vector<double> &a, const std::vector<double> &b)
{
	double s = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i)
		s += a[i] * b[i];
	return s;
}

inline std::vector<double> ref_normalize(std::vector<double> v)
{
	double n = std::sqrt(ref_dot(v, v));
	n = std::max(n, 1e-8);
	for (auto &x : v)
		x /= n;
	return v;
}

inline std::vector<double> row_of(const plid::Matrix &m, std::size_t r) { return {m.row(r).begin(), m.row(r).end()}; }

/// softmax(q·Sᵀ/√d)·S for identity projections.
inline std::vector<double> ref_attention(const std::vector<double> &q, const plid::Matrix &support)
{
	const std::size_t m = support.rows(), d = support.cols();
	std::vector<double> s(m);
	double mx = -INFINITY;
	for (std::size_t i = 0; i < m; ++i) {
		s[i] = ref_dot(q, row_of(support, i)) / std::sqrt(static_cast<double>(d));
		mx = std::max(mx, s[i]);
	}
	double z = 0.0;
	for (auto &x : s) {
		x = std::exp(x - mx);
		z += x;
	}
	std::vector<double> out(d, 0.0);
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t j = 0; j < d; ++j)
			out[j] += s[i] / z * support(i, j);
	return out;
}

/// x·W for a row vector.
inline std::vector<double> ref_rowmul(const std::vector<double> &x, const plid::Matrix &w)
{
	std::vector<double> out(w.cols(), 0.0);
	for (std::size_t k = 0; k < w.rows(); ++k)
		for (std::size_t j = 0; j < w.cols(); ++j)
			out[j] += x[k] * w(k, j);
	return out;
}

/// normalize(q + mask ⊙ (softmax((qWq)(SWk)ᵀ/√d)·(SWv))·Wo).
inline std::vector<double> ref_enhance(const std::vector<double> &q, const plid::Matrix &support, const plid::Matrix &wq,
                                       const plid::Matrix &wk, const plid::Matrix &wv, const plid::Matrix &wo,
                                       const std::vector<double> &mask = {})
{
	const std::size_t m = support.rows(), d = q.size();
	const auto qq = ref_rowmul(q, wq);
	std::vector<double> s(m);
	double mx = -INFINITY;
	for (std::size_t i = 0; i < m; ++i) {
		s[i] = ref_dot(qq, ref_rowmul(row_of(support, i), wk)) / std::sqrt(static_cast<double>(d));
		mx = std::max(mx, s[i]);
	}
	double z = 0.0;
	for (auto &x : s)
		z += (x = std::exp(x - mx));
	std::vector<double> mix(d, 0.0);
	for (std::size_t i = 0; i < m; ++i) {
		const auto v = ref_rowmul(row_of(support, i), wv);
		for (std::size_t j = 0; j < d; ++j)
			mix[j] += s[i] / z * v[j];
	}
	auto out = ref_rowmul(mix, wo);
	for (std::size_t j = 0; j < d; ++j)
		out[j] = q[j] + (mask.empty() ? 1.0 : mask[j]) * out[j];
	return ref_normalize(out);
}

inline double ref_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

/// normalize(v + gelu(v·W1 + b1)·W2 + b2).
inline std::vector<double> ref_head(const std::vector<double> &v, const plid::Matrix &w1, const plid::Matrix &b1, const plid::Matrix &w2,
                                    const plid::Matrix &b2)
{
	auto h = ref_rowmul(v, w1);
	for (std::size_t j = 0; j < h.size(); ++j)
		h[j] = ref_gelu(h[j] + b1[j]);
	auto o = ref_rowmul(h, w2);
	for (std::size_t j = 0; j < o.size(); ++j)
		o[j] += v[j] + b2[j];
	return ref_normalize(o);
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
	explicit TempDir(const std::string &tag)
	{
		static int counter = 0;
		path_ = std::filesystem::temp_directory_path() /
		        ("plid_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
		std::filesystem::remove_all(path_);
		std::filesystem::create_directories(path_);
	}
	~TempDir() { std::filesystem::remove_all(path_); }
	const std::filesystem::path &path() const { return path_; }

private:
	std::filesystem::path path_;
};

/// Fixture spec of the end-to-end acceptance criterion.
inline plid::corpus::SyntheticSpec fixture_spec()
{
	plid::corpus::SyntheticSpec s;
	s.num_states = 5;
	s.num_objects = 6;
	s.seen_fraction = 0.6;
	s.samples_per_pair = 20;
	s.descriptions_per_pair = 16;
	s.seed = 7;
	return s;
}

/// Desk-scale training config used with the fixture.
inline plid::TrainConfig fixture_config()
{
	plid::TrainConfig c;
	c.base_lr = 0.01;
	c.batch_size = 32;
	c.M = 16;
	c.N = 4;
	c.epochs = 20;
	c.embed_dim = 64;
	return c;
}

/// A smaller and faster variant for unit tests.
inline plid::corpus::SyntheticSpec small_spec()
{
	plid::corpus::SyntheticSpec s;
	s.num_states = 3;
	s.num_objects = 4;
	s.seen_fraction = 0.6;
	s.samples_per_pair = 6;
	s.descriptions_per_pair = 4;
	s.seed = 11;
	return s;
}

inline plid::TrainConfig small_config()
{
	plid::TrainConfig c;
	c.base_lr = 0.01;
	c.batch_size = 8;
	c.M = 4;
	c.N = 2;
	c.epochs = 3;
	c.embed_dim = 16;
	c.context_length = 4;
	return c;
}

} // namespace support
