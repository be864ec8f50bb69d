#include "plid/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "plid/errors.hpp"
#include "plid/lid.hpp"
#include "plid/objective.hpp"
#include "plid/rng.hpp"

namespace plid {

double relative_error(double analytic, double numeric, double floor)
{
	return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

GradcheckReport gradcheck(const corpus::Dataset &ds, const encoder::Backend &backend, const TrainConfig &cfg, const GradcheckOptions &options)
{
	auto records = ds.samples_in(corpus::SampleSplit::train);
	if (records.size() < options.samples || options.samples == 0)
		throw ValidationError("gradcheck: not enough training samples");
	records.resize(options.samples);
	auto seen = ds.split.seen;
	std::sort(seen.begin(), seen.end());
	auto ctx = objective::make_class_context(backend, seen, ds.split, ds.vocab, false, cfg.M);
	const auto &projection = backend.text_encoder().projection();
	const auto batch = make_batch(backend, records, cfg.N, fnv1a64("gradcheck-views", cfg.seed));

	Rng rng(cfg.seed);
	auto params = ModelParams::initialize(backend, ds.vocab, cfg.context_length, rng);
	for (auto *t : params.tensors())
		for (double &x : t->values())
			x += rng.normal(0.0, options.perturb);

	objective::LossOptions opts;
	opts.tau = cfg.tau;
	opts.w_s = opts.w_o = cfg.primitive_loss_weight;
	opts.use_margins = cfg.use_margins;
	opts.use_vlpd = cfg.use_vlpd;
	opts.lambda = cfg.use_vlpd ? objective::sample_lambda({cfg.beta_a, cfg.beta_b}, rng, objective::Mode::train) : 0.0;
	objective::DropoutMasks masks;
	if (cfg.attention_dropout > 0.0) {
		masks.text = lid::dropout_mask(ctx.num_classes(), cfg.embed_dim, cfg.attention_dropout, rng);
		masks.visual = lid::dropout_mask(batch.size(), cfg.embed_dim, cfg.attention_dropout, rng);
	}

	auto loss_at = [&](const ModelParams &p) {
		if (cfg.use_margins)
			objective::refresh_margins(ctx, p, projection, cfg.dense_cov_limit);
		return objective::total_loss(ParamVars::constants(p), batch, ctx, projection, opts, masks).report.total;
	};

	if (cfg.use_margins)
		objective::refresh_margins(ctx, params, projection, cfg.dense_cov_limit);
	const auto vars = ParamVars::parameters(params);
	const auto terms = objective::total_loss(vars, batch, ctx, projection, opts, masks);
	ad::backward(terms.total);
	const auto all = vars.all();

	GradcheckReport report;
	const auto names = ModelParams::names();
	auto tensors = params.tensors();
	for (std::size_t t = 0; t < tensors.size(); ++t) {
		const std::size_t n = tensors[t]->values().size();
		std::vector<std::size_t> picks(n);
		for (std::size_t i = 0; i < n; ++i)
			picks[i] = i;
		if (options.entries_per_tensor > 0 && n > options.entries_per_tensor) {
			for (std::size_t i = 0; i < options.entries_per_tensor; ++i)
				std::swap(picks[i], picks[i + rng.index(n - i)]);
			picks.resize(options.entries_per_tensor);
		}
		const auto &grad = all[t].grad();
		for (auto idx : picks) {
			double &x = tensors[t]->values()[idx];
			const double saved = x;
			// Fourth-order central stencil.
			auto at = [&](double offset) {
				x = saved + offset;
				return loss_at(params);
			};
			const double h = options.step;
			const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
			x = saved;
			GradcheckEntry e{names[t], idx, grad.empty() ? 0.0 : grad.values()[idx], numeric, 0.0};
			e.rel_error = relative_error(e.analytic, e.numeric, options.floor);
			if (e.rel_error > report.max_rel_error || report.entries.empty()) {
				report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
				report.worst = e.tensor + "[" + std::to_string(e.index) + "]";
			}
			report.entries.push_back(e);
		}
	}
	return report;
}

} // namespace plid
