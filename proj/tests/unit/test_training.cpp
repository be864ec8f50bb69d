#include <doctest.h>

#include <fstream>

#include "plid/checkpoint.hpp"
#include "plid/errors.hpp"
#include "plid/gradcheck.hpp"
#include "plid/mat_io.hpp"
#include "plid/training.hpp"
#include "support.hpp"

using namespace plid;

namespace {

struct Small {
	corpus::Dataset ds = corpus::generate_synthetic(support::small_spec());
	TrainConfig cfg = support::small_config();
	encoder::SyntheticBackend backend{ds, cfg.embed_dim, cfg.encoder_seed};
};

} // namespace

TEST_CASE("config: schedule, strict parsing, round trip, validation")
{
	TrainConfig d;
	CHECK(d.learning_rate(0) == 5e-5);
	CHECK(d.learning_rate(4) == 5e-5);
	CHECK(d.learning_rate(5) == 2.5e-5);
	CHECK(d.learning_rate(11) == doctest::Approx(1.25e-5).epsilon(1e-15));

	const auto j = d.to_json();
	CHECK(TrainConfig::from_json(j) == d);
	CHECK(TrainConfig::from_json(j).hash() == d.hash());
	CHECK_THROWS_AS(TrainConfig::from_json({{"learning_rate", 0.1}}), ConfigError);
	CHECK_THROWS_AS(TrainConfig::from_json({{"epochs", "many"}}), ConfigError);
	CHECK_THROWS_AS(TrainConfig::from_json({{"M", 0}}), ConfigError);
	CHECK_THROWS_AS(TrainConfig::from_json({{"tau", -1.0}}), ConfigError);
	const auto over = TrainConfig::from_json({{"seed", 9}}, support::small_config());
	CHECK(over.seed == 9);
	CHECK(over.embed_dim == 16);

	support::TempDir tmp("cfg");
	std::ofstream(tmp.path() / "c.json") << R"({"epochs": 3, "bogus": 1})";
	CHECK_THROWS_AS(TrainConfig::load(tmp.path() / "c.json"), ConfigError);
	CHECK_THROWS_AS(TrainConfig::load(tmp.path() / "missing.json"), ConfigError);

	TrainConfig e = d;
	e.embed_dim = 32;
	CHECK(!shape_compatible(d, e));
	e = d;
	e.epochs = 99;
	CHECK(shape_compatible(d, e));
}

TEST_CASE("adamw first step matches the closed form and decays weights")
{
	Small s;
	Rng rng(1);
	auto p = ModelParams::initialize(s.backend, s.ds.vocab, 4, rng);
	const auto before = p;
	support::Gen g(2);
	std::vector<Matrix> grads;
	for (const auto *t : p.tensors())
		grads.push_back(g.matrix(t->rows(), t->cols()));
	grads[3] = Matrix();
	auto st = AdamState::zeros(p);
	const double lr = 0.01, wd = 0.1, eps = 1e-8;
	training::adamw_step(p, grads, st, lr, wd);
	CHECK(st.step == 1);
	const auto after = p.tensors();
	const auto orig = before.tensors();
	for (std::size_t t = 0; t < after.size(); ++t)
		for (std::size_t i = 0; i < after[t]->size(); ++i) {
			const double gr = grads[t].empty() ? 0.0 : grads[t][i];
			// m̂ = g, v̂ = g² after one step.
			const double want = (*orig[t])[i] * (1 - lr * wd) - lr * gr / (std::abs(gr) + eps);
			CHECK((*after[t])[i] == doctest::Approx(want).epsilon(1e-12));
		}
}

TEST_CASE("epochs = 0 returns the initialization with its validation metrics")
{
	Small s;
	s.cfg.epochs = 0;
	const auto r = training::train(s.ds, s.cfg, s.backend);
	const auto init = training::initial_checkpoint(s.ds, s.cfg, s.backend);
	CHECK(r.best.params == init.params);
	CHECK(r.best.epoch == 0);
	CHECK(r.best.val_metrics == init.val_metrics);
	CHECK(r.last == r.best);
}

TEST_CASE("training is deterministic and resume is bit-exact")
{
	Small s;
	s.cfg.epochs = 4;
	std::vector<EpochLog> trace_a, trace_b;
	const auto a = training::train(s.ds, s.cfg, s.backend, [&](const EpochLog &e) { trace_a.push_back(e); });
	const auto b = training::train(s.ds, s.cfg, s.backend, [&](const EpochLog &e) { trace_b.push_back(e); });
	CHECK(trace_a == trace_b);
	CHECK(trace_a.size() == 5);
	CHECK(a.last == b.last);
	CHECK(a.best == b.best);

	auto half = s.cfg;
	half.epochs = 2;
	const auto first = training::train(s.ds, half, s.backend);
	// Through a save/load cycle.
	support::TempDir tmp("resume");
	save_checkpoint(first.last, tmp.path() / "last");
	const auto loaded = load_checkpoint(tmp.path() / "last");
	CHECK(loaded == first.last);
	const auto cont = training::resume(loaded, s.ds, s.cfg, s.backend);
	CHECK(cont.last.params == a.last.params);
	CHECK(cont.last.adam == a.last.adam);
	CHECK(cont.last.log == a.last.log);
	CHECK(cont.last.val_metrics == a.last.val_metrics);
	CHECK(cont.best.best_epoch == a.best.best_epoch);

	// No extra epochs: unchanged.
	const auto same = training::resume(a.last, s.ds, s.cfg, s.backend);
	CHECK(same.last.val_metrics == a.last.val_metrics);
	CHECK(same.last.params == a.last.params);

	auto wide = s.cfg;
	wide.embed_dim = 32;
	CHECK_THROWS(training::resume(a.last, s.ds, wide, s.backend));
}

TEST_CASE("checkpoint round trip, corruption and compatibility errors")
{
	Small s;
	s.cfg.epochs = 1;
	const auto r = training::train(s.ds, s.cfg, s.backend);
	support::TempDir tmp("ckpt");
	const auto dir = tmp.path() / "c";
	save_checkpoint(r.last, dir);
	CHECK(load_checkpoint(dir) == r.last);
	CHECK(log_csv(r.last.log).rfind("epoch,loss_y,loss_s,loss_o,lr,val_AUC\n", 0) == 0);

	CHECK_NOTHROW(check_compatible(r.last, 3, 4, 16));
	CHECK_THROWS_AS(check_compatible(r.last, 3, 5, 16), ShapeError);
	CHECK_THROWS_AS(load_checkpoint(tmp.path() / "nowhere"), LoadError);

	const auto file = dir / "params" / "tfe_key.mat";
	mat_io::write(file, Matrix(3, 3), mat_io::Precision::f64);
	CHECK_THROWS_AS(load_checkpoint(dir), ShapeError);

	std::ofstream(file, std::ios::binary | std::ios::trunc) << "garbage";
	CHECK_THROWS_AS(load_checkpoint(dir), Error);

	save_checkpoint(r.last, dir);
	Matrix nan_key = *r.last.params.tensors()[4];
	nan_key[0] = NAN;
	mat_io::write(file, nan_key, mat_io::Precision::f64);
	CHECK_THROWS_AS(load_checkpoint(dir), ValidationError);

	std::filesystem::remove(dir / "params" / "tfe_key.mat");
	CHECK_THROWS_AS(load_checkpoint(dir), LoadError);
}

TEST_CASE("the frozen encoder does not change during training")
{
	Small s;
	const auto proj = s.backend.text_encoder().projection();
	const auto lex = s.backend.lexicon().token_vector("photo");
	const auto desc = s.backend.description_embeddings(s.ds.split.seen.front(), false);
	const auto img = s.backend.encode_image(s.ds.samples.front().image_key);
	(void)training::train(s.ds, s.cfg, s.backend);
	CHECK(s.backend.text_encoder().projection() == proj);
	CHECK(s.backend.lexicon().token_vector("photo") == lex);
	CHECK(s.backend.description_embeddings(s.ds.split.seen.front(), false) == desc);
	CHECK(s.backend.encode_image(s.ds.samples.front().image_key) == img);
}

TEST_CASE("training loss decreases over the first five epochs on the fixture")
{
	const auto ds = corpus::generate_synthetic(support::fixture_spec());
	auto cfg = support::fixture_config();
	cfg.epochs = 5;
	encoder::SyntheticBackend backend(ds, cfg.embed_dim, cfg.encoder_seed);
	std::vector<EpochLog> log;
	const auto r = training::train(ds, cfg, backend, [&](const EpochLog &e) { log.push_back(e); });
	REQUIRE(log.size() == 6);
	int non_improving = 0;
	for (std::size_t e = 2; e < log.size(); ++e)
		if (!(log[e].loss_total < log[e - 1].loss_total))
			++non_improving;
	CHECK(non_improving <= 1);
	CHECK(log.back().loss_total < log[1].loss_total);
	CHECK(r.best.val_metrics.auc > log.front().val_auc);
}

TEST_CASE("training rejects labels outside the seen set and mismatched widths")
{
	Small s;
	auto bad = s.ds;
	for (auto &rec : bad.samples)
		if (rec.split == corpus::SampleSplit::train) {
			rec.state_id = s.ds.split.unseen_test.front().state;
			rec.object_id = s.ds.split.unseen_test.front().object;
			break;
		}
	CHECK_THROWS(training::train(bad, s.cfg, s.backend));
	auto wide = s.cfg;
	wide.embed_dim = 32;
	CHECK_THROWS_AS(training::train(s.ds, wide, s.backend), ConfigError);
}

TEST_CASE("gradcheck passes on a small dataset with every entry checked")
{
	Small s;
	s.cfg.recompute_every_step = true;
	s.cfg.embed_dim = 8;
	encoder::SyntheticBackend backend(s.ds, 8, s.cfg.encoder_seed);
	GradcheckOptions o;
	o.entries_per_tensor = 0;
	const auto r = gradcheck(s.ds, backend, s.cfg, o);
	CHECK(r.entries.size() > 100);
	CHECK(r.passed());
	CHECK(relative_error(1.0, 1.0, 1e-6) == 0.0);
	CHECK(relative_error(0.0, 1e-9, 1e-6) == doctest::Approx(1e-3));
}
