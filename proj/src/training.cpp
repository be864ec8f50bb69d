#include "plid/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plid/errors.hpp"
#include "plid/lid.hpp"
#include "plid/objective.hpp"
#include "plid/rng.hpp"

namespace plid::training {

void adamw_step(ModelParams &params, const std::vector<Matrix> &grads, AdamState &state, double lr, double weight_decay,
                const AdamOptions &options)
{
	auto tensors = params.tensors();
	if (grads.size() != tensors.size() || state.m.size() != tensors.size() || state.v.size() != tensors.size())
		throw ShapeError("adamw_step: tensor count mismatch");
	++state.step;
	const double t = static_cast<double>(state.step);
	const double c1 = 1.0 - std::pow(options.beta1, t);
	const double c2 = 1.0 - std::pow(options.beta2, t);
	for (std::size_t i = 0; i < tensors.size(); ++i) {
		auto &p = tensors[i]->values();
		auto &m = state.m[i].values();
		auto &v = state.v[i].values();
		const bool has_grad = !grads[i].empty();
		if (has_grad && grads[i].values().size() != p.size())
			throw ShapeError("adamw_step: gradient shape mismatch for " + ModelParams::names()[i]);
		for (std::size_t k = 0; k < p.size(); ++k) {
			const double g = has_grad ? grads[i].values()[k] : 0.0;
			m[k] = options.beta1 * m[k] + (1.0 - options.beta1) * g;
			v[k] = options.beta2 * v[k] + (1.0 - options.beta2) * g * g;
			p[k] *= 1.0 - lr * weight_decay;
			p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options.eps);
		}
	}
}

namespace {

std::uint64_t train_view_seed(const TrainConfig &cfg, std::size_t epoch)
{
	return fnv1a64("train-views:" + std::to_string(epoch), cfg.seed);
}

class Trainer {
public:
	Trainer(const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend)
	    : ds_(ds), cfg_(cfg), backend_(backend), records_(ds.samples_in(corpus::SampleSplit::train))
	{
		cfg_.validate();
		if (backend.embed_dim() != cfg.embed_dim)
			throw ConfigError("backend width " + std::to_string(backend.embed_dim()) + " differs from embed_dim " + std::to_string(cfg.embed_dim));
		if (records_.empty())
			throw ValidationError("no training samples");
		for (const auto &r : records_)
			if (!ds.split.is_seen(r.label()))
				throw ValidationError("training sample '" + r.image_key + "' has an unseen label");
		auto seen = ds.split.seen;
		std::sort(seen.begin(), seen.end());
		ctx_ = objective::make_class_context(backend, seen, ds.split, ds.vocab, false, cfg.M);
		val_ = evaluation::make_scoring_set(backend, ds, evaluation::closed_candidates(ds.split, corpus::SampleSplit::val),
		                                    ds.samples_in(corpus::SampleSplit::val), cfg, false);
	}

	Checkpoint initial()
	{
		Rng rng(cfg_.seed);
		Checkpoint c;
		c.params = ModelParams::initialize(backend_, ds_.vocab, cfg_.context_length, rng);
		c.config = cfg_;
		c.adam = AdamState::zeros(c.params);
		c.rng_state = rng.state();
		c.val_metrics = evaluation::validation_metrics(c.params, backend_, val_, cfg_);
		c.best_params = c.params;
		c.best_val_metrics = c.val_metrics;
		return c;
	}

	TrainResult run(Checkpoint state, const EpochCallback &on_epoch)
	{
		state.config = cfg_;
		Checkpoint best = state;
		best.params = state.best_params;
		if (state.best_epoch != state.epoch) {
			// Best snapshot comes from an earlier epoch; only its parameters and metrics are kept.
			best.epoch = state.best_epoch;
			best.val_metrics = state.best_val_metrics;
			best.log.resize(std::min(best.log.size(), state.best_epoch));
		}
		Rng rng;
		rng.set_state(state.rng_state);
		while (state.epoch < cfg_.epochs) {
			const auto log = run_epoch(state, rng);
			state.rng_state = rng.state();
			state.val_metrics = evaluation::validation_metrics(state.params, backend_, val_, cfg_);
			state.log.push_back(log);
			state.log.back().val_auc = state.val_metrics.auc;
			if (state.val_metrics.auc > state.best_val_metrics.auc) {
				state.best_params = state.params;
				state.best_epoch = state.epoch;
				state.best_val_metrics = state.val_metrics;
				best = state;
			}
			if (on_epoch)
				on_epoch(state.log.back());
		}
		best.best_params = best.params;
		best.best_epoch = best.epoch;
		best.best_val_metrics = best.val_metrics;
		return {best, state};
	}

private:
	EpochLog run_epoch(Checkpoint &state, Rng &rng)
	{
		const std::size_t epoch = state.epoch;
		const double lr = cfg_.learning_rate(epoch);
		const auto &projection = backend_.text_encoder().projection();
		if (cfg_.use_margins && !cfg_.recompute_every_step)
			objective::refresh_margins(ctx_, state.params, projection, cfg_.dense_cov_limit);
		const Batch all = make_batch(backend_, records_, cfg_.N, train_view_seed(cfg_, epoch));

		std::vector<std::size_t> order(records_.size());
		std::iota(order.begin(), order.end(), 0);
		for (std::size_t i = order.size(); i > 1; --i)
			std::swap(order[i - 1], order[rng.index(i)]);

		const objective::BetaPrior prior{cfg_.beta_a, cfg_.beta_b};
		EpochLog log;
		log.epoch = epoch + 1;
		log.lr = lr;
		std::size_t steps = 0;
		for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
			const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
			const auto batch = select(all, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(begin),
			                                                        order.begin() + static_cast<std::ptrdiff_t>(end)));
			if (cfg_.use_margins && cfg_.recompute_every_step)
				objective::refresh_margins(ctx_, state.params, projection, cfg_.dense_cov_limit);

			objective::LossOptions opts;
			opts.tau = cfg_.tau;
			opts.w_s = opts.w_o = cfg_.primitive_loss_weight;
			opts.use_margins = cfg_.use_margins;
			opts.use_vlpd = cfg_.use_vlpd;
			opts.lambda = 0.0;
			if (cfg_.use_vlpd)
				opts.lambda = objective::sample_lambda(prior, rng, cfg_.use_slm ? objective::Mode::train : objective::Mode::eval);
			objective::DropoutMasks masks;
			if (cfg_.attention_dropout > 0.0) {
				masks.text = lid::dropout_mask(ctx_.num_classes(), cfg_.embed_dim, cfg_.attention_dropout, rng);
				masks.visual = lid::dropout_mask(batch.size(), cfg_.embed_dim, cfg_.attention_dropout, rng);
			}

			const auto vars = ParamVars::parameters(state.params);
			const auto terms = objective::total_loss(vars, batch, ctx_, projection, opts, masks);
			ad::backward(terms.total);
			std::vector<Matrix> grads;
			for (const auto &v : vars.all())
				grads.push_back(v.grad());
			adamw_step(state.params, grads, state.adam, lr, cfg_.weight_decay);

			log.loss_y += terms.report.loss_y;
			log.loss_s += terms.report.loss_s;
			log.loss_o += terms.report.loss_o;
			log.loss_total += terms.report.total;
			++steps;
		}
		const double n = static_cast<double>(steps);
		log.loss_y /= n;
		log.loss_s /= n;
		log.loss_o /= n;
		log.loss_total /= n;
		state.epoch = epoch + 1;
		return log;
	}

	const corpus::Dataset &ds_;
	TrainConfig cfg_;
	const encoder::Backend &backend_;
	std::vector<corpus::SampleRecord> records_;
	objective::ClassContext ctx_;
	evaluation::ScoringSet val_;
};

} // namespace

Checkpoint initial_checkpoint(const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend)
{
	return Trainer(ds, cfg, backend).initial();
}

TrainResult train(const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend, const EpochCallback &on_epoch)
{
	Trainer trainer(ds, cfg, backend);
	auto init = trainer.initial();
	if (on_epoch)
		on_epoch(EpochLog{0, 0.0, 0.0, 0.0, 0.0, 0.0, init.val_metrics.auc});
	return trainer.run(std::move(init), on_epoch);
}

TrainResult resume(const Checkpoint &from, const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend,
                   const EpochCallback &on_epoch)
{
	if (!shape_compatible(from.config, cfg))
		throw ShapeError("resume: config shapes differ from the checkpoint");
	check_compatible(from, ds.vocab.num_states(), ds.vocab.num_objects(), backend.embed_dim());
	Trainer trainer(ds, cfg, backend);
	return trainer.run(from, on_epoch);
}

} // namespace plid::training
