#include "plid/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plid/errors.hpp"
#include "plid/parallel.hpp"
#include "plid/vlpd.hpp"

namespace plid::objective {

std::vector<double> csp_logits(std::span<const double> v, const Matrix &means)
{
	if (means.cols() != v.size())
		throw ShapeError("csp_logits: width mismatch");
	std::vector<double> out(means.rows());
	for (std::size_t c = 0; c < means.rows(); ++c)
		out[c] = dot(v, means.row(c));
	return out;
}

double loss_upper_bound(std::span<const double> logits, std::span<const double> margins, std::size_t target, double tau)
{
	if (!(tau > 0.0))
		throw ValidationError("loss_upper_bound: tau must be positive");
	if (logits.size() != margins.size() || logits.empty())
		throw ShapeError("loss_upper_bound: logits and margins must have equal non-zero length");
	if (target >= logits.size())
		throw ShapeError("loss_upper_bound: target out of range");
	std::vector<double> z(logits.size());
	double mx = -std::numeric_limits<double>::infinity();
	for (std::size_t k = 0; k < z.size(); ++k) {
		if (!std::isfinite(logits[k]) || !std::isfinite(margins[k]))
			throw NumericError("loss_upper_bound: non-finite input");
		z[k] = (logits[k] + margins[k]) / tau;
		mx = std::max(mx, z[k]);
	}
	double sum = 0.0;
	for (double x : z)
		sum += std::exp(x - mx);
	return mx + std::log(sum) - logits[target] / tau;
}

void BetaPrior::validate() const
{
	if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
		throw ValidationError("Beta prior parameters must be positive and finite");
}

double sample_lambda(const BetaPrior &prior, Rng &rng, Mode mode)
{
	prior.validate();
	return mode == Mode::eval ? prior.mean() : rng.beta(prior.a, prior.b);
}

std::vector<double> mix_logits(std::span<const double> h_comp, std::span<const double> h_rc, double lambda)
{
	if (h_comp.size() != h_rc.size())
		throw ShapeError("mix_logits: shape mismatch");
	if (!(lambda >= 0.0 && lambda <= 1.0))
		throw ValidationError("mix_logits: lambda must lie in [0, 1]");
	std::vector<double> out(h_comp.size());
	for (std::size_t i = 0; i < out.size(); ++i)
		out[i] = (1.0 - lambda) * h_comp[i] + lambda * h_rc[i];
	return out;
}

ad::Var mix_logits(const ad::Var &h_comp, const ad::Var &h_rc, double lambda)
{
	if (!(lambda >= 0.0 && lambda <= 1.0))
		throw ValidationError("mix_logits: lambda must lie in [0, 1]");
	if (lambda == 0.0)
		return h_comp;
	if (lambda == 1.0)
		return h_rc;
	return ad::add(ad::scale(h_comp, 1.0 - lambda), ad::scale(h_rc, lambda));
}

std::size_t ClassContext::class_index(const corpus::Composition &c) const
{
	auto it = std::find(classes.begin(), classes.end(), c);
	if (it == classes.end())
		throw ValidationError("label (" + std::to_string(c.state) + "," + std::to_string(c.object) + ") is not a candidate class");
	return static_cast<std::size_t>(it - classes.begin());
}

ClassContext make_class_context(const encoder::Backend &backend, const std::vector<corpus::Composition> &classes,
                                const corpus::CompositionSplit &split, const corpus::Vocabulary &vocab, bool allow_templates,
                                std::size_t max_support)
{
	if (classes.empty())
		throw ValidationError("no candidate classes");
	ClassContext ctx;
	ctx.classes = classes;
	ctx.num_states = vocab.num_states();
	ctx.num_objects = vocab.num_objects();
	for (const auto &c : classes)
		ctx.seen.push_back(split.is_seen(c));

	if (!allow_templates) {
		std::string missing;
		for (const auto &c : classes)
			if (!backend.has_descriptions(c))
				missing += (missing.empty() ? "" : ", ") + corpus::composition_name(vocab, c);
		if (!missing.empty())
			throw ValidationError("candidates missing descriptions: " + missing);
	}

	std::vector<Matrix> blocks(classes.size());
	parallel_for(classes.size(), [&](std::size_t i) { blocks[i] = backend.description_embeddings(classes[i], allow_templates); });
	if (max_support > 0)
		for (auto &b : blocks)
			if (b.rows() > max_support)
				b = Matrix(max_support, b.cols(), std::vector<double>(b.data(), b.data() + max_support * b.cols()));
	ctx.support_size = blocks.front().rows();
	const std::size_t d = backend.embed_dim(), m = ctx.support_size;
	ctx.descriptions = Matrix(classes.size() * m, d);
	for (std::size_t i = 0; i < blocks.size(); ++i) {
		if (blocks[i].rows() != m)
			throw ValidationError("class " + corpus::composition_name(vocab, classes[i]) + " has " + std::to_string(blocks[i].rows()) +
			                      " descriptions, expected " + std::to_string(m));
		std::copy(blocks[i].values().begin(), blocks[i].values().end(), ctx.descriptions.data() + i * m * d);
	}
	return ctx;
}

void refresh_margins(ClassContext &ctx, const ModelParams &params, const Matrix &text_projection, std::size_t dense_cov_limit)
{
	const std::size_t m = ctx.support_size, d = ctx.descriptions.cols();
	std::vector<Matrix> blocks;
	for (std::size_t c = 0; c < ctx.num_classes(); ++c)
		blocks.emplace_back(m, d, std::vector<double>(ctx.descriptions.data() + c * m * d, ctx.descriptions.data() + (c + 1) * m * d));
	const bool dense = ctx.num_classes() <= dense_cov_limit;
	const auto dist = lid::build_distributions(params.prompt, params.text_attention, text_projection, blocks, ctx.classes, dense);
	ctx.composition_margins = dense ? lid::margin_tensor(*dist.covariance) : lid::share_covariance(dist, ctx.num_objects);

	// Primitive distributions group the seen classes only.
	lid::ClassDistributionSet seen_dist;
	seen_dist.support_size = m;
	std::vector<std::size_t> rows;
	for (std::size_t c = 0; c < ctx.num_classes(); ++c)
		if (ctx.seen[c]) {
			seen_dist.classes.push_back(ctx.classes[c]);
			rows.push_back(c);
		}
	seen_dist.means = Matrix(rows.size(), d);
	seen_dist.offsets = Matrix(rows.size() * m, d);
	for (std::size_t i = 0; i < rows.size(); ++i) {
		std::copy_n(dist.means.data() + rows[i] * d, d, seen_dist.means.data() + i * d);
		std::copy_n(dist.offsets.data() + rows[i] * m * d, m * d, seen_dist.offsets.data() + i * m * d);
	}
	const auto prim = lid::primitive_distributions(seen_dist, ctx.num_states, ctx.num_objects);
	ctx.state_margins = lid::margin_tensor(*prim.states.covariance);
	ctx.object_margins = lid::margin_tensor(*prim.objects.covariance);
}

Forward forward(const ParamVars &params, const Batch &batch, const ClassContext &ctx, const Matrix &text_projection, bool use_vlpd,
                double lambda, const DropoutMasks &masks)
{
	Forward f;
	f.lambda = use_vlpd ? lambda : 0.0;
	f.decomposed = use_vlpd;
	const auto queries = lid::class_queries(params.prompt, text_projection, ctx.classes);
	f.means = lid::enhance(queries, ad::constant(ctx.descriptions), params.text_attention, masks.text);
	f.v = lid::enhance(ad::constant(batch.anchors), ad::constant(batch.support), params.visual_attention, masks.visual);
	f.h_comp = ad::matmul_bt(f.v, f.means);
	if (!use_vlpd) {
		f.h_mixed = f.h_comp;
		return f;
	}
	const auto t_state = vlpd::grouped_targets(f.means, vlpd::grouping_matrix(ctx.classes, ctx.seen, ctx.num_states, true), "state");
	const auto t_object = vlpd::grouped_targets(f.means, vlpd::grouping_matrix(ctx.classes, ctx.seen, ctx.num_objects, false), "object");
	f.f_state = vlpd::apply_head(params.state_head, f.v);
	f.f_object = vlpd::apply_head(params.object_head, f.v);
	f.h_state = ad::matmul_bt(f.f_state, t_state);
	f.h_object = ad::matmul_bt(f.f_object, t_object);
	f.h_rc = vlpd::gather_recomposed(f.h_state, f.h_object, ctx.classes);
	f.h_mixed = mix_logits(f.h_comp, f.h_rc, f.lambda);
	return f;
}

namespace {

ad::Var margins_for(const ad::Var &features, const std::optional<lid::MarginTensor> &tensor, const std::vector<std::size_t> &targets,
                    std::size_t classes, bool enabled, double tau, const char *what)
{
	if (!enabled)
		return ad::constant(Matrix(features.rows(), classes));
	if (!tensor)
		throw ValidationError(std::string(what) + " margins requested but not built");
	return ad::margin_terms(ad::hadamard(features, features), tensor->view(), targets, tau);
}

void check_finite(double value, const char *term)
{
	if (!std::isfinite(value))
		throw NumericError(std::string("non-finite ") + term);
}

} // namespace

LossTerms total_loss(const ParamVars &params, const Batch &batch, const ClassContext &ctx, const Matrix &text_projection,
                     const LossOptions &options, const DropoutMasks &masks)
{
	if (batch.labels.size() != batch.size() || batch.size() == 0)
		throw ValidationError("total_loss: batch needs one label per image");
	LossTerms out;
	out.fwd = forward(params, batch, ctx, text_projection, options.use_vlpd, options.lambda, masks);
	const auto &f = out.fwd;

	std::vector<std::size_t> y, s, o;
	for (const auto &label : batch.labels) {
		y.push_back(ctx.class_index(label));
		s.push_back(label.state);
		o.push_back(label.object);
	}
	const auto m_y = margins_for(f.v, ctx.composition_margins, y, ctx.num_classes(), options.use_margins, options.tau, "composition");
	out.loss_y = ad::margin_cross_entropy(f.h_mixed, m_y, y, options.tau);
	check_finite(out.loss_y.scalar(), "loss_y");
	out.report.loss_y = out.loss_y.scalar();
	out.total = out.loss_y;

	if (options.use_vlpd) {
		const auto m_s = margins_for(f.f_state, ctx.state_margins, s, ctx.num_states, options.use_margins, options.tau, "state");
		const auto m_o = margins_for(f.f_object, ctx.object_margins, o, ctx.num_objects, options.use_margins, options.tau, "object");
		out.loss_s = ad::margin_cross_entropy(f.h_state, m_s, s, options.tau);
		out.loss_o = ad::margin_cross_entropy(f.h_object, m_o, o, options.tau);
		check_finite(out.loss_s.scalar(), "loss_s");
		check_finite(out.loss_o.scalar(), "loss_o");
		out.report.loss_s = out.loss_s.scalar();
		out.report.loss_o = out.loss_o.scalar();
		out.report.w_s = options.w_s;
		out.report.w_o = options.w_o;
		if (options.w_s != 0.0)
			out.total = ad::add(out.total, ad::scale(out.loss_s, options.w_s));
		if (options.w_o != 0.0)
			out.total = ad::add(out.total, ad::scale(out.loss_o, options.w_o));
	}
	out.report.total = out.total.scalar();
	check_finite(out.report.total, "total loss");
	return out;
}

} // namespace plid::objective
