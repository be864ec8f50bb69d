#include <doctest.h>

#include "plid/errors.hpp"
#include "plid/vlpd.hpp"
#include "support.hpp"

using namespace plid;
using namespace plid::vlpd;

TEST_CASE("recompose: hand example, zero state, loop oracle, shift invariance")
{
	const std::vector<double> hs{1, 2}, ho{10, 20, 30};
	CHECK(recompose(hs, ho) == Matrix{{11, 21, 31}, {12, 22, 32}});

	const auto z = recompose(std::vector<double>{0, 0}, ho);
	for (std::size_t i = 0; i < 2; ++i)
		for (std::size_t j = 0; j < 3; ++j)
			CHECK(z(i, j) == ho[j]);
	CHECK_THROWS_AS(recompose(std::vector<double>{}, ho), ShapeError);

	support::Gen g(1);
	for (int trial = 0; trial < 50; ++trial) {
		const auto a = g.vec(g.size(1, 9)), b = g.vec(g.size(1, 9));
		const auto h = recompose(a, b);
		const double c = g.normal();
		auto a2 = a;
		for (auto &x : a2)
			x += c;
		const auto h2 = recompose(a2, b);
		std::size_t arg = 0, arg2 = 0;
		for (std::size_t i = 0; i < a.size(); ++i)
			for (std::size_t j = 0; j < b.size(); ++j) {
				CHECK(h(i, j) == a[i] + b[j]);
				CHECK(h2(i, j) == doctest::Approx(h(i, j) + c).epsilon(1e-12));
				if (h.values()[i * b.size() + j] > h.values()[arg])
					arg = i * b.size() + j;
				if (h2.values()[i * b.size() + j] > h2.values()[arg2])
					arg2 = i * b.size() + j;
			}
		CHECK(arg == arg2);
	}
}

TEST_CASE("projection heads: identity is normalize, near-identity matches a loop oracle")
{
	support::Gen g(2);
	const std::size_t d = 12;
	const auto v = g.vec(d);
	const auto id = apply_head(ProjectionHead::identity(d), v);
	const auto want = support::ref_normalize(v);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(id[j] == doctest::Approx(want[j]).epsilon(1e-14));

	Rng rng(3);
	auto head = ProjectionHead::near_identity(d, rng);
	for (auto &x : head.b1.values())
		x = g.normal(0.1);
	for (auto &x : head.b2.values())
		x = g.normal(0.1);
	const auto out = apply_head(head, v);
	const auto oracle = support::ref_head(v, head.w1, head.b1, head.w2, head.b2);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(out[j] == doctest::Approx(oracle[j]).epsilon(1e-12));
	// Near identity: cosine with normalize(v) stays high.
	CHECK(support::ref_dot(out, want) > 0.9);
}

TEST_CASE("grouping matrix averages members; excluded classes do not count")
{
	const std::vector<corpus::Composition> classes{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
	const auto g = grouping_matrix(classes, {true, true, true, false}, 2, true);
	CHECK(g == Matrix{{0.5, 0.5, 0, 0}, {0, 0, 1, 0}});
	const auto go = grouping_matrix(classes, {}, 2, false);
	CHECK(go == Matrix{{0.5, 0, 0, 0.5}, {0, 0.5, 0.5, 0}});
	CHECK_THROWS_AS(grouping_matrix(classes, {}, 1, true), ShapeError);
}

TEST_CASE("primitive logits: singleton groups, orthogonal input, 2×2 hand toy")
{
	const std::size_t d = 4;
	const DecompositionHeads id{ProjectionHead::identity(d), ProjectionHead::identity(d)};
	// One composition per state: h_state[s] = cos(v, t_y).
	const std::vector<corpus::Composition> diag{{0, 0}, {1, 1}};
	const Matrix means{{1, 0, 0, 0}, {0, 1, 0, 0}};
	const std::vector<double> v{0.6, 0.8, 0, 0};
	const auto p = primitive_logits(v, id, means, diag, {}, 2, 2);
	CHECK(p.state[0] == doctest::Approx(0.6));
	CHECK(p.state[1] == doctest::Approx(0.8));

	const auto orth = primitive_logits(std::vector<double>{0, 0, 1, 0}, id, means, diag, {}, 2, 2);
	for (double x : orth.state)
		CHECK(std::abs(x) < 1e-6);
	for (double x : orth.object)
		CHECK(std::abs(x) < 1e-6);

	// 2×2 toy: classes (0,0),(0,1),(1,0) with t = e1, e2, e3.
	// State 0 target normalize(e1+e2), state 1 target e3; object 0 normalize(e1+e3), object 1 e2.
	const std::vector<corpus::Composition> three{{0, 0}, {0, 1}, {1, 0}};
	const Matrix m3{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
	const std::vector<double> u{0.5, 0.5, 0.5, 0.5};
	const auto h = primitive_logits(u, id, m3, three, {}, 2, 2);
	const double r = 1.0 / std::sqrt(2.0);
	CHECK(h.state[0] == doctest::Approx(r));
	CHECK(h.state[1] == doctest::Approx(0.5));
	CHECK(h.object[0] == doctest::Approx(r));
	CHECK(h.object[1] == doctest::Approx(0.5));

	// Seen mask removing the only member of a group is an error.
	CHECK_THROWS(primitive_logits(u, id, m3, three, {true, true, false}, 2, 2));
}

TEST_CASE("primitive logits are cosines for random inputs and heads")
{
	support::Gen g(4);
	Rng rng(5);
	for (int trial = 0; trial < 20; ++trial) {
		const std::size_t d = g.size(2, 10), s = g.size(1, 4), o = g.size(1, 4);
		std::vector<corpus::Composition> classes;
		for (std::size_t i = 0; i < s; ++i)
			for (std::size_t j = 0; j < o; ++j)
				classes.push_back({i, j});
		const auto means = g.unit_rows(classes.size(), d);
		const DecompositionHeads heads{ProjectionHead::near_identity(d, rng, 1.0), ProjectionHead::near_identity(d, rng, 1.0)};
		const auto p = primitive_logits(g.unit(d), heads, means, classes, {}, s, o);
		for (double x : p.state)
			CHECK((x >= -1.0 - 1e-12 && x <= 1.0 + 1e-12));
		for (double x : p.object)
			CHECK((x >= -1.0 - 1e-12 && x <= 1.0 + 1e-12));
	}
}

TEST_CASE("gather_recomposed picks H[s_c, o_c] per class")
{
	support::Gen g(6);
	const auto hs = ad::constant(g.matrix(3, 2)), ho = ad::constant(g.matrix(3, 3));
	const std::vector<corpus::Composition> classes{{1, 2}, {0, 0}, {1, 1}};
	const auto out = gather_recomposed(hs, ho, classes).value();
	for (std::size_t b = 0; b < 3; ++b)
		for (std::size_t c = 0; c < classes.size(); ++c)
			CHECK(out(b, c) == doctest::Approx(hs.value()(b, classes[c].state) + ho.value()(b, classes[c].object)).epsilon(1e-14));
	CHECK_THROWS_AS(gather_recomposed(hs, ho, {{2, 0}}), ShapeError);
}
