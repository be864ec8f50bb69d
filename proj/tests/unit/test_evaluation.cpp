#include <doctest.h>

#include <fstream>
#include <numeric>

#include "metric_oracle.hpp"
#include "plid/errors.hpp"
#include "plid/evaluation.hpp"
#include "plid/training.hpp"
#include "support.hpp"

using namespace plid;
using namespace plid::evaluation;

namespace {

void check_against_oracle(const Matrix &logits, const Labels &labels, const std::vector<bool> &seen)
{
	const auto r = bias_sweep(logits, labels, seen, 41);
	const auto biases = support::oracle_biases(logits, seen, 41);
	REQUIRE(r.bias_grid.size() == biases.size());
	for (std::size_t i = 0; i < biases.size(); ++i) {
		if (std::isinf(biases[i]))
			CHECK(r.bias_grid[i].bias == biases[i]);
		else
			CHECK(r.bias_grid[i].bias == doctest::Approx(biases[i]).epsilon(1e-12));
	}
	std::vector<double> used;
	for (const auto &p : r.bias_grid)
		used.push_back(p.bias);
	const auto o = support::oracle_sweep(logits, labels, seen, used);
	CHECK(std::abs(r.best_seen - o.best_seen) <= 1e-9);
	CHECK(std::abs(r.best_unseen - o.best_unseen) <= 1e-9);
	CHECK(std::abs(r.best_hm - o.best_hm) <= 1e-9);
	CHECK(std::abs(r.auc - o.auc) <= 1e-9);
	for (std::size_t i = 0; i < used.size(); ++i) {
		CHECK(r.bias_grid[i].seen_acc == doctest::Approx(o.seen[i]));
		CHECK(r.bias_grid[i].unseen_acc == doctest::Approx(o.unseen[i]));
	}
}

} // namespace

TEST_CASE("bias sweep equals the brute-force oracle on the hand table")
{
	const support::HandTable t;
	check_against_oracle(t.logits, t.labels, t.seen);
	const auto r = bias_sweep(t.logits, t.labels, t.seen, 41);
	const auto [s0, u0] = accuracy_at(t.logits, t.labels, t.seen, 0.0);
	CHECK(s0 == doctest::Approx(200.0 / 3));
	CHECK(u0 == doctest::Approx(100.0 / 3));
	CHECK(r.best_hm >= 2 * s0 * u0 / (s0 + u0));
	// +∞ end: unseen-only classification.
	CHECK(r.bias_grid.back().seen_acc == 0.0);
	CHECK(r.bias_grid.back().unseen_acc == 100.0);
	CHECK(r.bias_grid.front().unseen_acc == 0.0);
}

TEST_CASE("bias sweep on random tables: oracle, shift and permutation invariance")
{
	support::Gen g(1);
	for (int trial = 0; trial < 40; ++trial) {
		const std::size_t c = g.size(2, 9), n = g.size(2, 30);
		std::vector<bool> seen(c);
		for (std::size_t k = 0; k < c; ++k)
			seen[k] = k % 2 == 0;
		const auto logits = g.matrix(n, c);
		Labels labels(n);
		for (std::size_t i = 0; i < n; ++i)
			labels[i] = static_cast<std::int64_t>(i < 2 ? i % 2 : g.size(0, c - 1));
		check_against_oracle(logits, labels, seen);

		const auto base = bias_sweep(logits, labels, seen, 41);
		const auto [s0, u0] = accuracy_at(logits, labels, seen, 0.0);
		CHECK(base.best_hm >= (s0 + u0 > 0 ? 2 * s0 * u0 / (s0 + u0) : 0.0) - 1e-12);
		for (const auto &p : base.bias_grid) {
			CHECK((p.seen_acc >= 0 && p.seen_acc <= 100));
			CHECK((p.unseen_acc >= 0 && p.unseen_acc <= 100));
		}

		Matrix shifted = logits;
		const double cshift = g.normal(3.0);
		for (auto &x : shifted.values())
			x += cshift;
		CHECK(bias_sweep(shifted, labels, seen, 41).auc == doctest::Approx(base.auc).epsilon(1e-9));

		std::vector<std::size_t> perm(c);
		std::iota(perm.begin(), perm.end(), 0);
		std::shuffle(perm.begin(), perm.end(), std::mt19937_64(trial));
		Matrix pl(n, c);
		std::vector<bool> ps(c);
		std::vector<std::int64_t> inv(c);
		for (std::size_t k = 0; k < c; ++k) {
			ps[k] = seen[perm[k]];
			inv[perm[k]] = static_cast<std::int64_t>(k);
			for (std::size_t i = 0; i < n; ++i)
				pl(i, k) = logits(i, perm[k]);
		}
		Labels plab(n);
		for (std::size_t i = 0; i < n; ++i)
			plab[i] = inv[static_cast<std::size_t>(labels[i])];
		const auto pr = bias_sweep(pl, plab, ps, 41);
		CHECK(pr.auc == doctest::Approx(base.auc).epsilon(1e-12));
		CHECK(pr.best_hm == doctest::Approx(base.best_hm).epsilon(1e-12));
	}
}

TEST_CASE("perfect separation scores 100 everywhere")
{
	Matrix logits(4, 4, 0.0);
	const Labels labels{0, 1, 2, 3};
	for (std::size_t i = 0; i < 4; ++i)
		logits(i, i) = 1.0;
	const auto r = bias_sweep(logits, labels, {true, true, false, false}, 41);
	CHECK(r.best_seen == 100.0);
	CHECK(r.best_unseen == 100.0);
	CHECK(r.best_hm == 100.0);
	CHECK(r.auc == doctest::Approx(100.0));
}

TEST_CASE("bias sweep errors")
{
	const support::HandTable t;
	CHECK_THROWS_AS(bias_sweep(t.logits, {0, 0, 0, 1, 1, 1}, t.seen, 41), ValidationError);
	CHECK_THROWS_AS(bias_sweep(t.logits, {2, 2, 3, 2, 3, 3}, t.seen, 41), ValidationError);
	CHECK_THROWS_AS(bias_sweep(t.logits, t.labels, {true, true, true, true}, 41), ValidationError);
	CHECK_THROWS_AS(bias_sweep(t.logits, t.labels, t.seen, 1), ValidationError);
	CHECK_THROWS_AS(bias_sweep(t.logits, {0, 1}, t.seen, 41), ShapeError);
	CHECK_THROWS_AS(parse_setting("half"), ConfigError);
}

TEST_CASE("report JSON, CSV and SVG round trip")
{
	const support::HandTable t;
	auto r = bias_sweep(t.logits, t.labels, t.seen, 41);
	r.setting = Setting::open;
	r.feasibility_threshold = -std::numeric_limits<double>::infinity();
	r.config_hash = "abc";
	CHECK(MetricsReport::from_json(r.to_json()) == r);
	support::TempDir tmp("report");
	write_report(r, tmp.path());
	CHECK(read_report(tmp.path() / "report.json") == r);
	std::ifstream csv(tmp.path() / "curve.csv");
	std::string header;
	std::getline(csv, header);
	CHECK(header == "bias,seen_acc,unseen_acc");
	CHECK(std::filesystem::file_size(tmp.path() / "curve.svg") > 100);
	CHECK(curve_csv(r).find("-inf,") != std::string::npos);
	CHECK_THROWS_AS(read_report(tmp.path() / "none.json"), LoadError);
	CHECK(metrics_table({r}).find("open") != std::string::npos);
}

TEST_CASE("scoring: no decomposition is the pure cosine; mixing uses the prior mean; single candidate")
{
	const auto ds = corpus::generate_synthetic(support::small_spec());
	auto cfg = support::small_config();
	encoder::SyntheticBackend backend(ds, cfg.embed_dim, cfg.encoder_seed);
	Rng rng(3);
	auto params = ModelParams::initialize(backend, ds.vocab, cfg.context_length, rng);
	support::Gen g(4);
	for (auto *m : params.tensors())
		for (auto &x : m->values())
			x += g.normal(0.05);
	const auto candidates = closed_candidates(ds.split, corpus::SampleSplit::test);
	auto set = make_scoring_set(backend, ds, candidates, ds.samples_in(corpus::SampleSplit::test), cfg, false);
	const auto vars = ParamVars::constants(params);
	const auto &proj = backend.text_encoder().projection();

	const auto mixed = score(params, backend, set, cfg);
	const auto f = objective::forward(vars, set.batch, set.ctx, proj, true, 0.1);
	CHECK(mixed.rows() == set.batch.size());
	for (std::size_t i = 0; i < mixed.size(); ++i)
		CHECK(mixed[i] == doctest::Approx(0.9 * f.h_comp.value()[i] + 0.1 * f.h_rc.value()[i]).epsilon(1e-12));

	auto plain = cfg;
	plain.use_vlpd = false;
	const auto cos = score(params, backend, set, plain);
	for (std::size_t i = 0; i < set.batch.size(); ++i)
		for (std::size_t k = 0; k < candidates.size(); ++k)
			CHECK(cos(i, k) == doctest::Approx(support::ref_dot(support::row_of(f.v.value(), i), support::row_of(f.means.value(), k)))
			                     .epsilon(1e-12));

	const std::vector<corpus::Composition> one{ds.split.seen.front()};
	const auto single = make_scoring_set(backend, ds, one, ds.samples_in(corpus::SampleSplit::test), plain, false);
	CHECK(score(params, backend, single, plain).cols() == 1);

	auto sparse = ds;
	sparse.descriptions.texts.erase(ds.split.unseen_test.front());
	encoder::SyntheticBackend sparse_backend(sparse, cfg.embed_dim, cfg.encoder_seed);
	try {
		(void)make_scoring_set(sparse_backend, sparse, candidates, sparse.samples_in(corpus::SampleSplit::test), cfg, false);
		FAIL("missing descriptions accepted");
	} catch (const ValidationError &e) {
		CHECK(std::string(e.what()).find(corpus::composition_name(ds.vocab, ds.split.unseen_test.front())) != std::string::npos);
	}
	CHECK_NOTHROW(make_scoring_set(sparse_backend, sparse, candidates, sparse.samples_in(corpus::SampleSplit::test), cfg, true));
}

TEST_CASE("candidate sets")
{
	const auto ds = corpus::generate_synthetic(support::fixture_spec());
	const auto closed = closed_candidates(ds.split, corpus::SampleSplit::test);
	CHECK(closed.size() == 24);
	CHECK(std::is_sorted(closed.begin(), closed.end()));
	CHECK(closed_candidates(ds.split, corpus::SampleSplit::val).size() == 24);
	CHECK(all_compositions(ds.vocab).size() == 30);
}

TEST_CASE("trained fixture: open-world AUC does not exceed closed-world AUC; metrics equal the sweep of scores")
{
	const auto ds = corpus::generate_synthetic(support::fixture_spec());
	const auto cfg = support::fixture_config();
	encoder::SyntheticBackend backend(ds, cfg.embed_dim, cfg.encoder_seed);
	const auto r = training::train(ds, cfg, backend);
	const auto [closed, open] = evaluate(r.best.params, ds, backend, cfg);
	CHECK(closed.setting == Setting::closed);
	CHECK(open.setting == Setting::open);
	CHECK(open.feasibility_threshold.has_value());
	CHECK(open.auc <= closed.auc);

	const auto set = make_scoring_set(backend, ds, closed_candidates(ds.split, corpus::SampleSplit::test),
	                                  ds.samples_in(corpus::SampleSplit::test), cfg, false);
	auto direct = bias_sweep(score(r.best.params, backend, set, cfg), set.labels, set.ctx.seen, cfg.bias_grid_points);
	direct.config_hash = cfg.hash();
	CHECK(direct == closed);
}
