#include <doctest.h>

#include <cmath>

#include "plid/errors.hpp"
#include "plid/lid.hpp"
#include "support.hpp"

using namespace plid;
using namespace plid::lid;

namespace {

ClassDistributionSet random_distributions(support::Gen &g, const std::vector<corpus::Composition> &classes, std::size_t m, std::size_t d)
{
	ClassDistributionSet dist;
	dist.classes = classes;
	dist.support_size = m;
	dist.means = g.unit_rows(classes.size(), d);
	dist.offsets = g.matrix(classes.size() * m, d, 0.3);
	dist.covariance = class_covariance(dist.offsets, classes.size(), m);
	return dist;
}

// Independent covariance: explicit triple loop.
double ref_cov(const Matrix &off, std::size_t m, std::size_t j, std::size_t k, std::size_t y)
{
	double s = 0.0;
	for (std::size_t i = 0; i < m; ++i)
		s += off(k * m + i, j) * off(y * m + i, j);
	return s / static_cast<double>(m);
}

} // namespace

TEST_CASE("compose_class_tokens: length L+2, context from 'a photo of' repeated")
{
	encoder::Lexicon lex(8, 7);
	corpus::Vocabulary vocab{{"sliced", "ripe"}, {"tomato", "apple"}};
	const auto p = SoftPrompt::initialize(lex, vocab, 8);
	const auto seq = compose_class_tokens(p, 1, 0);
	CHECK(seq.length() == 10);
	const char *words[] = {"a", "photo", "of"};
	for (std::size_t i = 0; i < 8; ++i)
		CHECK(support::row_of(seq.vectors, i) == lex.token_vector(words[i % 3]));
	CHECK(support::row_of(seq.vectors, 8) == lex.phrase_vector("ripe"));
	CHECK(support::row_of(seq.vectors, 9) == lex.phrase_vector("tomato"));
	CHECK(compose_class_tokens(p, 1, 0).vectors == seq.vectors);
	CHECK_THROWS_AS(compose_class_tokens(p, 2, 0), ShapeError);
}

TEST_CASE("tfe: uniform support, full dropout and attention oracle")
{
	support::Gen g(2);
	const std::size_t d = 8;
	const auto att = CrossAttention::identity(d);
	const auto q = g.unit(d), u = g.unit(d);
	Matrix same(4, d);
	for (std::size_t i = 0; i < 4; ++i)
		std::copy(u.begin(), u.end(), same.row(i).begin());
	std::vector<double> qu(d);
	for (std::size_t j = 0; j < d; ++j)
		qu[j] = q[j] + u[j];
	const auto want = support::ref_normalize(qu);
	const auto got = tfe(q, same, att);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));

	Rng rng(1);
	const auto dropped = tfe(q, same, att, 1.0, &rng);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(dropped[j] == doctest::Approx(q[j]).epsilon(1e-12));

	const auto support_rows = g.matrix(4, d);
	const auto attn = support::ref_attention(q, support_rows);
	std::vector<double> sum(d);
	for (std::size_t j = 0; j < d; ++j)
		sum[j] = q[j] + attn[j];
	const auto want2 = support::ref_normalize(sum);
	const auto got2 = tfe(q, support_rows, att);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(got2[j] == doctest::Approx(want2[j]).epsilon(1e-12));
	CHECK_THROWS(tfe(q, g.matrix(4, d + 1), att));
}

TEST_CASE("tfe with general projections matches a loop oracle")
{
	support::Gen g(12);
	const std::size_t d = 6, m = 5;
	CrossAttention att{g.matrix(d, d, 0.5), g.matrix(d, d, 0.5), g.matrix(d, d, 0.5), g.matrix(d, d, 0.5)};
	const auto q = g.unit(d);
	const auto s = g.matrix(m, d);
	auto rowmul = [&](const std::vector<double> &x, const Matrix &w) {
		std::vector<double> out(d, 0.0);
		for (std::size_t j = 0; j < d; ++j)
			for (std::size_t k = 0; k < d; ++k)
				out[j] += x[k] * w(k, j);
		return out;
	};
	const auto qq = rowmul(q, att.query);
	std::vector<double> scores(m);
	std::vector<std::vector<double>> vals(m);
	for (std::size_t i = 0; i < m; ++i) {
		scores[i] = support::ref_dot(qq, rowmul(support::row_of(s, i), att.key)) / std::sqrt(static_cast<double>(d));
		vals[i] = rowmul(support::row_of(s, i), att.value);
	}
	double mx = *std::max_element(scores.begin(), scores.end()), z = 0.0;
	for (auto &x : scores)
		z += (x = std::exp(x - mx));
	std::vector<double> mix(d, 0.0);
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t j = 0; j < d; ++j)
			mix[j] += scores[i] / z * vals[i][j];
	const auto out = rowmul(mix, att.output);
	std::vector<double> res(d);
	for (std::size_t j = 0; j < d; ++j)
		res[j] = q[j] + out[j];
	const auto want = support::ref_normalize(res);
	const auto got = tfe(q, s, att);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
}

TEST_CASE("vfe: no views, identical views, random views")
{
	support::Gen g(3);
	const std::size_t d = 16;
	const auto att = CrossAttention::identity(d);
	const auto a = g.unit(d);
	const auto v0 = vfe(a, Matrix(0, d), att);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(v0[j] == doctest::Approx(a[j]).epsilon(1e-12));
	Matrix copies(3, d);
	for (std::size_t i = 0; i < 3; ++i)
		std::copy(a.begin(), a.end(), copies.row(i).begin());
	const auto v1 = vfe(a, copies, att);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(v1[j] == doctest::Approx(a[j]).epsilon(1e-12));

	const auto views = g.unit_rows(8, d);
	const auto sup = visual_support(a, views);
	CHECK(sup.rows() == 9);
	const auto attn = support::ref_attention(a, sup);
	std::vector<double> sum(d);
	for (std::size_t j = 0; j < d; ++j)
		sum[j] = a[j] + attn[j];
	const auto want = support::ref_normalize(sum);
	const auto got = vfe(a, views, att);
	for (std::size_t j = 0; j < d; ++j)
		CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
	CHECK(std::sqrt(support::ref_dot(got, got)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dropout mask: rate 0 is ones, rate 1 is zeros, else inverted scaling")
{
	Rng rng(4);
	const auto ones = dropout_mask(3, 4, 0.0, rng);
	for (double x : ones.values())
		CHECK(x == 1.0);
	const auto zeros = dropout_mask(3, 4, 1.0, rng);
	for (double x : zeros.values())
		CHECK(x == 0.0);
	const auto half = dropout_mask(100, 100, 0.5, rng);
	double sum = 0.0;
	for (double x : half.values()) {
		CHECK((x == 0.0 || x == 2.0));
		sum += x;
	}
	CHECK(sum / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("covariance: 2×2 hand toy, zero offsets, diagonal definition")
{
	// Class 0 offsets (+1, −1), class 1 offsets (+1, +1), d = 1, M = 2:
	// Σ00 = (1+1)/2 = 1, Σ11 = 1, Σ01 = (1·1 + (−1)·1)/2 = 0.
	Matrix off(4, 1, std::vector<double>{1, -1, 1, 1});
	const auto cov = class_covariance(off, 2, 2);
	CHECK(cov.at(0, 0, 0) == 1.0);
	CHECK(cov.at(0, 1, 1) == 1.0);
	CHECK(cov.at(0, 0, 1) == 0.0);
	CHECK(cov.at(0, 1, 0) == 0.0);

	const auto z = class_covariance(Matrix(6, 3), 3, 2);
	for (double x : z.values())
		CHECK(x == 0.0);

	support::Gen g(5);
	const auto off2 = g.matrix(12, 4);
	const auto c2 = class_covariance(off2, 3, 4);
	for (std::size_t j = 0; j < 4; ++j)
		for (std::size_t k = 0; k < 3; ++k)
			for (std::size_t y = 0; y < 3; ++y)
				CHECK(c2.at(j, k, y) == doctest::Approx(ref_cov(off2, 4, j, k, y)).epsilon(1e-13));
	CHECK_THROWS_AS(class_covariance(off2, 5, 4), ShapeError);
}

TEST_CASE("margin tensor properties on random covariances")
{
	support::Gen g(6);
	for (int trial = 0; trial < 20; ++trial) {
		const std::size_t c = g.size(1, 12), m = g.size(1, 6), d = g.size(1, 10);
		const auto off = g.matrix(c * m, d);
		const auto cov = class_covariance(off, c, m);
		const auto a = margin_tensor(cov);
		for (std::size_t j = 0; j < d; ++j) {
			// Σ_j PSD: xᵀΣx ≥ −1e-8 for random x.
			for (int probe = 0; probe < 5; ++probe) {
				const auto x = g.vec(c);
				double q = 0.0;
				for (std::size_t k = 0; k < c; ++k)
					for (std::size_t y = 0; y < c; ++y)
						q += x[k] * cov.at(j, k, y) * x[y];
				CHECK(q >= -1e-8);
			}
			for (std::size_t k = 0; k < c; ++k) {
				CHECK(a.at(j, k, k) == 0.0);
				for (std::size_t y = 0; y < c; ++y) {
					CHECK(cov.at(j, k, y) == cov.at(j, y, k));
					CHECK(a.at(j, k, y) == a.at(j, y, k));
					CHECK(a.at(j, k, y) >= -1e-8);
				}
			}
		}
	}
}

TEST_CASE("margin formula: independent classes, zero covariance")
{
	PairTensor cov(3, 2);
	cov.at(0, 0, 0) = 2.0;
	cov.at(0, 1, 1) = 0.5;
	cov.at(1, 2, 2) = 3.0;
	const auto a = margin_tensor(cov);
	CHECK(a.at(0, 0, 1) == 2.5);
	CHECK(a.at(1, 0, 2) == 3.0);
	CHECK(a.at(1, 0, 1) == 0.0);
	const auto z = margin_tensor(PairTensor(3, 2));
	for (double x : z.storage().values())
		CHECK(x == 0.0);
}

TEST_CASE("margin_quadratic: hand example 7, zeros, 1/τ scaling")
{
	PairTensor a(2, 2);
	a.at(0, 0, 1) = 3.0;
	a.at(1, 0, 1) = 1.0;
	const MarginTensor mt(a);
	const std::vector<double> v{1.0, 2.0};
	CHECK(margin_quadratic(v, mt, 0, 1, 0.5) == 7.0);
	CHECK(margin_quadratic(v, mt, 1, 1, 0.5) == 0.0);
	CHECK(margin_quadratic(std::vector<double>{0.0, 0.0}, mt, 0, 1, 0.5) == 0.0);
	CHECK_THROWS_AS(margin_quadratic(v, mt, 0, 1, 0.0), ValidationError);

	support::Gen g(7);
	const auto cov = class_covariance(g.matrix(20, 5), 4, 5);
	const auto m4 = margin_tensor(cov);
	for (int trial = 0; trial < 20; ++trial) {
		const auto x = g.vec(5);
		const double tau = g.uniform(0.01, 2.0);
		CHECK(margin_quadratic(x, m4, 0, 3, 2.0 * tau) == margin_quadratic(x, m4, 0, 3, tau) / 2.0);
	}
}

TEST_CASE("share_covariance with one state equals the dense path bit-for-bit")
{
	support::Gen g(8);
	for (std::size_t objects : {2u, 3u, 5u}) {
		std::vector<corpus::Composition> classes;
		for (std::size_t o = 0; o < objects; ++o)
			classes.push_back({0, o});
		const auto dist = random_distributions(g, classes, 4, 6);
		const auto dense = margin_tensor(*dist.covariance);
		const auto shared = share_covariance(dist, objects);
		CHECK(shared.shared());
		for (std::size_t j = 0; j < 6; ++j)
			for (std::size_t k = 0; k < objects; ++k)
				for (std::size_t y = 0; y < objects; ++y)
					CHECK(shared.at(j, k, y) == dense.at(j, k, y));
	}
}

TEST_CASE("share_covariance on a 3×3 toy equals the group-then-covariance oracle")
{
	support::Gen g(9);
	std::vector<corpus::Composition> classes;
	for (std::size_t s = 0; s < 3; ++s)
		for (std::size_t o = 0; o < 3; ++o)
			if (!(s == 2 && o == 0))
				classes.push_back({s, o});
	const std::size_t m = 3, d = 4;
	const auto dist = random_distributions(g, classes, m, d);
	const auto shared = share_covariance(dist, 3);
	CHECK(shared.bytes() == 3 * 3 * d * sizeof(double));

	// Oracle: average offsets per object, then Σ and A from the averaged blocks.
	Matrix grouped(3 * m, d);
	std::vector<double> count(3, 0.0);
	for (std::size_t c = 0; c < classes.size(); ++c) {
		count[classes[c].object] += 1.0;
		for (std::size_t i = 0; i < m; ++i)
			for (std::size_t j = 0; j < d; ++j)
				grouped(classes[c].object * m + i, j) += dist.offsets(c * m + i, j);
	}
	for (std::size_t o = 0; o < 3; ++o)
		for (std::size_t i = 0; i < m; ++i)
			for (std::size_t j = 0; j < d; ++j)
				grouped(o * m + i, j) /= count[o];
	for (std::size_t k = 0; k < classes.size(); ++k)
		for (std::size_t y = 0; y < classes.size(); ++y)
			for (std::size_t j = 0; j < d; ++j) {
				const std::size_t a = classes[k].object, b = classes[y].object;
				const double want = ref_cov(grouped, m, j, a, a) + ref_cov(grouped, m, j, b, b) - 2.0 * ref_cov(grouped, m, j, a, b);
				CHECK(shared.at(j, k, y) == doctest::Approx(want).epsilon(1e-12));
			}
	// Two compositions sharing an object read identical rows.
	CHECK(shared.at(1, 0, 4) == shared.at(1, 3, 4));
}

TEST_CASE("shared storage scales as d·|O|², dense as d·C²")
{
	support::Gen g(10);
	for (std::size_t states : {2u, 4u})
		for (std::size_t objects : {3u, 6u})
			for (std::size_t d : {4u, 8u}) {
				std::vector<corpus::Composition> classes;
				for (std::size_t s = 0; s < states; ++s)
					for (std::size_t o = 0; o < objects; ++o)
						classes.push_back({s, o});
				const auto dist = random_distributions(g, classes, 2, d);
				CHECK(share_covariance(dist, objects).bytes() == d * objects * objects * sizeof(double));
				CHECK(margin_tensor(*dist.covariance).bytes() == d * classes.size() * classes.size() * sizeof(double));
			}
}

TEST_CASE("primitive distributions: singleton groups, zero offsets, 2×2 oracle")
{
	support::Gen g(11);
	const std::vector<corpus::Composition> classes{{0, 0}, {0, 1}, {1, 1}};
	auto dist = random_distributions(g, classes, 2, 3);
	const auto prim = primitive_distributions(dist, 2, 2);
	// State 1 has only (1,1).
	for (std::size_t j = 0; j < 3; ++j)
		CHECK(prim.states.means(1, j) == dist.means(2, j));
	// Object 1 averages (0,1) and (1,1).
	for (std::size_t j = 0; j < 3; ++j)
		CHECK(prim.objects.means(1, j) == doctest::Approx(0.5 * (dist.means(1, j) + dist.means(2, j))));
	for (std::size_t i = 0; i < 2; ++i)
		for (std::size_t j = 0; j < 3; ++j)
			CHECK(prim.objects.offsets(2 + i, j) == doctest::Approx(0.5 * (dist.offsets(2 + i, j) + dist.offsets(4 + i, j))));

	dist.offsets = Matrix(6, 3);
	const auto zero = primitive_distributions(dist, 2, 2);
	for (double x : zero.states.covariance->values())
		CHECK(x == 0.0);
	CHECK_THROWS_AS(primitive_distributions(dist, 3, 2), ValidationError);
}

TEST_CASE("build_distributions: means unit norm, support points = mean + offset")
{
	const auto ds = corpus::generate_synthetic(support::small_spec());
	encoder::SyntheticBackend backend(ds, 16, 7);
	const auto prompt = SoftPrompt::initialize(backend.lexicon(), ds.vocab, 4);
	std::vector<Matrix> blocks;
	for (const auto &c : ds.split.seen)
		blocks.push_back(backend.description_embeddings(c, false));
	const auto dist = build_distributions(prompt, CrossAttention::identity(16), backend.text_encoder().projection(), blocks, ds.split.seen);
	CHECK(dist.num_classes() == ds.split.seen.size());
	for (std::size_t c = 0; c < dist.num_classes(); ++c) {
		const auto r = support::row_of(dist.means, c);
		CHECK(std::sqrt(support::ref_dot(r, r)) == doctest::Approx(1.0).epsilon(1e-12));
	}
	const auto sp = dist.support_points();
	for (std::size_t j = 0; j < 16; ++j)
		CHECK(sp(5, j) - dist.means(1, j) == doctest::Approx(dist.offsets(5, j)).epsilon(1e-12));
	blocks.back() = Matrix(3, 16);
	CHECK_THROWS(build_distributions(prompt, CrossAttention::identity(16), backend.text_encoder().projection(), blocks, ds.split.seen));
}
