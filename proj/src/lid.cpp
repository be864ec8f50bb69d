#include "plid/lid.hpp"

#include <cmath>

#include "plid/errors.hpp"
#include "plid/kernels.hpp"

namespace plid::lid {

SoftPrompt SoftPrompt::initialize(const encoder::Lexicon &lexicon, const corpus::Vocabulary &vocab, std::size_t context_length)
{
	if (context_length < 1)
		throw ValidationError("soft prompt context length must be ≥ 1");
	const std::size_t dt = lexicon.dim();
	const auto init = lexicon.embed_tokens("a photo of");
	SoftPrompt p{Matrix(context_length, dt), Matrix(vocab.num_states(), dt), Matrix(vocab.num_objects(), dt)};
	for (std::size_t i = 0; i < context_length; ++i) {
		const auto src = init.vectors.row(i % init.length());
		std::copy(src.begin(), src.end(), p.context.row(i).begin());
	}
	for (std::size_t s = 0; s < vocab.num_states(); ++s) {
		const auto v = lexicon.phrase_vector(vocab.states[s]);
		std::copy(v.begin(), v.end(), p.state_table.row(s).begin());
	}
	for (std::size_t o = 0; o < vocab.num_objects(); ++o) {
		const auto v = lexicon.phrase_vector(vocab.objects[o]);
		std::copy(v.begin(), v.end(), p.object_table.row(o).begin());
	}
	return p;
}

encoder::TokenSequence compose_class_tokens(const SoftPrompt &prompt, std::size_t state, std::size_t object)
{
	if (state >= prompt.state_table.rows() || object >= prompt.object_table.rows())
		throw ShapeError("compose_class_tokens: primitive id out of range");
	const std::size_t l = prompt.context_length(), dt = prompt.context.cols();
	encoder::TokenSequence seq{Matrix(l + 2, dt)};
	std::copy(prompt.context.values().begin(), prompt.context.values().end(), seq.vectors.data());
	const auto s = prompt.state_table.row(state);
	const auto o = prompt.object_table.row(object);
	std::copy(s.begin(), s.end(), seq.vectors.row(l).begin());
	std::copy(o.begin(), o.end(), seq.vectors.row(l + 1).begin());
	return seq;
}

PromptVars PromptVars::constants(const SoftPrompt &p)
{
	return {ad::constant(p.context), ad::constant(p.state_table), ad::constant(p.object_table)};
}

PromptVars PromptVars::parameters(const SoftPrompt &p)
{
	return {ad::parameter(p.context), ad::parameter(p.state_table), ad::parameter(p.object_table)};
}

ad::Var class_queries(const PromptVars &prompt, const Matrix &text_projection, const std::vector<corpus::Composition> &classes)
{
	std::vector<std::size_t> states, objects;
	for (const auto &c : classes) {
		states.push_back(c.state);
		objects.push_back(c.object);
	}
	const double tokens = static_cast<double>(prompt.context.rows() + 2);
	auto pooled = ad::add(ad::gather_rows(prompt.state_table, std::move(states)), ad::gather_rows(prompt.object_table, std::move(objects)));
	pooled = ad::scale(ad::add_row(pooled, ad::sum_rows(prompt.context)), 1.0 / tokens);
	return ad::row_normalize(ad::matmul_bt(pooled, ad::constant(text_projection)), encoder::norm_floor);
}

CrossAttention CrossAttention::identity(std::size_t dim)
{
	return {Matrix::identity(dim), Matrix::identity(dim), Matrix::identity(dim), Matrix::identity(dim)};
}

AttentionVars AttentionVars::constants(const CrossAttention &a)
{
	return {ad::constant(a.query), ad::constant(a.key), ad::constant(a.value), ad::constant(a.output)};
}

AttentionVars AttentionVars::parameters(const CrossAttention &a)
{
	return {ad::parameter(a.query), ad::parameter(a.key), ad::parameter(a.value), ad::parameter(a.output)};
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng &rng)
{
	Matrix mask(rows, cols);
	if (rate >= 1.0)
		return mask;
	const double keep = 1.0 / (1.0 - rate);
	for (auto &x : mask.values())
		x = rng.uniform() < rate ? 0.0 : keep;
	return mask;
}

ad::Var enhance(const ad::Var &queries, const ad::Var &support, const AttentionVars &attention, const Matrix &mask)
{
	const std::size_t d = queries.cols();
	if (support.cols() != d)
		throw ShapeError("cross attention: query and support widths differ");
	if (support.rows() == 0 || queries.rows() == 0 || support.rows() % queries.rows() != 0)
		throw ShapeError("cross attention: support must hold a non-empty block per query");
	const auto q = ad::matmul(queries, attention.query);
	const auto k = ad::matmul(support, attention.key);
	const auto v = ad::matmul(support, attention.value);
	const auto weights = ad::row_softmax(ad::scale(ad::block_dot(q, k), 1.0 / std::sqrt(static_cast<double>(d))));
	auto out = ad::matmul(ad::block_wsum(weights, v), attention.output);
	if (!mask.empty())
		out = ad::hadamard(out, ad::constant(mask));
	return ad::row_normalize(ad::add(queries, out), encoder::norm_floor);
}

namespace {

std::vector<double> enhance_one(std::span<const double> query, const Matrix &support, const CrossAttention &attention, double dropout,
                                Rng *rng)
{
	if (support.rows() == 0)
		throw ShapeError("cross attention: empty support");
	if (support.cols() != query.size() || attention.dim() != query.size())
		throw ShapeError("cross attention: width mismatch");
	Matrix mask;
	if (rng != nullptr && dropout > 0.0)
		mask = dropout_mask(1, query.size(), dropout, *rng);
	const auto out = enhance(ad::constant(Matrix::row_vector(query)), ad::constant(support), AttentionVars::constants(attention), mask);
	return out.value().values();
}

} // namespace

std::vector<double> tfe(std::span<const double> query, const Matrix &support, const CrossAttention &attention, double dropout, Rng *rng)
{
	return enhance_one(query, support, attention, dropout, rng);
}

Matrix visual_support(std::span<const double> anchor, const Matrix &views)
{
	if (!views.empty() && views.cols() != anchor.size())
		throw ShapeError("visual support: view width differs from anchor");
	Matrix s(views.rows() + 1, anchor.size());
	std::copy(anchor.begin(), anchor.end(), s.row(0).begin());
	std::copy(views.values().begin(), views.values().end(), s.data() + anchor.size());
	return s;
}

std::vector<double> vfe(std::span<const double> anchor, const Matrix &views, const CrossAttention &attention, double dropout, Rng *rng)
{
	return enhance_one(anchor, visual_support(anchor, views), attention, dropout, rng);
}

Matrix PairTensor::slice(std::size_t j) const
{
	Matrix m(groups_, groups_);
	for (std::size_t k = 0; k < groups_; ++k)
		for (std::size_t y = 0; y < groups_; ++y)
			m(k, y) = at(j, k, y);
	return m;
}

MarginTensor::MarginTensor(PairTensor a, std::vector<std::size_t> group_of) : a_(std::move(a)), group_of_(std::move(group_of))
{
	for (auto g : group_of_)
		if (g >= a_.groups())
			throw ShapeError("margin tensor: group index out of range");
}

double MarginTensor::at(std::size_t j, std::size_t k, std::size_t y) const
{
	return view().pair(k, y)[j];
}

MarginView MarginTensor::view() const
{
	return MarginView{classes(), a_.groups(), a_.dim(), a_.values().data(), std::span<const std::size_t>(group_of_)};
}

Matrix ClassDistributionSet::support_points() const
{
	Matrix out = offsets;
	const std::size_t d = dim();
	for (std::size_t c = 0; c < num_classes(); ++c)
		for (std::size_t m = 0; m < support_size; ++m)
			kernels::axpy(1.0, means.data() + c * d, out.data() + (c * support_size + m) * d, d);
	return out;
}

Covariance class_covariance(const Matrix &offsets, std::size_t classes, std::size_t support_size)
{
	if (support_size == 0 || offsets.rows() != classes * support_size)
		throw ShapeError("class_covariance: offsets must hold classes·M rows");
	const std::size_t d = offsets.cols();
	Covariance cov(classes, d);
	const double inv = 1.0 / static_cast<double>(support_size);
	for (std::size_t k = 0; k < classes; ++k)
		for (std::size_t y = k; y < classes; ++y) {
			double *out = cov.pair(k, y);
			for (std::size_t m = 0; m < support_size; ++m)
				kernels::mul_acc(offsets.data() + (k * support_size + m) * d, offsets.data() + (y * support_size + m) * d, out, d);
			kernels::scale(inv, out, d);
			if (y != k)
				std::copy(out, out + d, cov.pair(y, k));
		}
	return cov;
}

ClassDistributionSet build_distributions(const SoftPrompt &prompt, const CrossAttention &attention, const Matrix &text_projection,
                                         const std::vector<Matrix> &descriptions, const std::vector<corpus::Composition> &classes,
                                         bool with_covariance)
{
	if (descriptions.size() != classes.size() || classes.empty())
		throw ShapeError("build_distributions: one description block per class required");
	const std::size_t m = descriptions.front().rows(), d = text_projection.rows();
	ClassDistributionSet dist;
	dist.classes = classes;
	dist.support_size = m;
	dist.offsets = Matrix(classes.size() * m, d);
	for (std::size_t c = 0; c < classes.size(); ++c) {
		if (descriptions[c].rows() != m)
			throw ValidationError("build_distributions: class " + std::to_string(c) + " has " + std::to_string(descriptions[c].rows()) +
			                      " descriptions, expected " + std::to_string(m));
		if (descriptions[c].cols() != d)
			throw ShapeError("build_distributions: description width mismatch");
		std::copy(descriptions[c].values().begin(), descriptions[c].values().end(), dist.offsets.data() + c * m * d);
	}
	const auto queries = class_queries(PromptVars::constants(prompt), text_projection, classes);
	dist.means = enhance(queries, ad::constant(dist.offsets), AttentionVars::constants(attention)).value();
	if (with_covariance)
		dist.covariance = class_covariance(dist.offsets, classes.size(), m);
	return dist;
}

MarginTensor margin_tensor(const Covariance &cov)
{
	const std::size_t g = cov.groups(), d = cov.dim();
	PairTensor a(g, d);
	for (std::size_t k = 0; k < g; ++k)
		for (std::size_t y = 0; y < g; ++y)
			for (std::size_t j = 0; j < d; ++j)
				a.at(j, k, y) = cov.at(j, k, k) + cov.at(j, y, y) - cov.at(j, k, y) - cov.at(j, y, k);
	return MarginTensor(std::move(a));
}

double margin_quadratic(std::span<const double> v, const MarginTensor &a, std::size_t k, std::size_t y, double tau)
{
	if (!(tau > 0.0))
		throw ValidationError("margin_quadratic: tau must be positive");
	if (v.size() != a.dim())
		throw ShapeError("margin_quadratic: width mismatch");
	if (k >= a.classes() || y >= a.classes())
		throw ShapeError("margin_quadratic: class out of range");
	const double *row = a.view().pair(k, y);
	double acc = 0.0;
	for (std::size_t j = 0; j < v.size(); ++j)
		acc += v[j] * v[j] * row[j];
	return acc / (2.0 * tau);
}

GroupedDistributions group_distributions(const ClassDistributionSet &dist, std::span<const std::size_t> label_of, std::size_t num_groups,
                                         const char *what)
{
	const std::size_t c = dist.num_classes(), m = dist.support_size, d = dist.dim();
	if (label_of.size() != c)
		throw ShapeError("group_distributions: one label per class required");
	std::vector<std::size_t> count(num_groups);
	for (auto g : label_of) {
		if (g >= num_groups)
			throw ShapeError("group_distributions: label out of range");
		++count[g];
	}
	for (std::size_t g = 0; g < num_groups; ++g)
		if (count[g] == 0)
			throw ValidationError(std::string("no composition covers ") + what + " " + std::to_string(g));

	GroupedDistributions out;
	out.group_of.assign(label_of.begin(), label_of.end());
	auto &grp = out.groups;
	grp.support_size = m;
	grp.means = Matrix(num_groups, d);
	grp.offsets = Matrix(num_groups * m, d);
	for (std::size_t k = 0; k < c; ++k) {
		const std::size_t g = label_of[k];
		kernels::axpy(1.0, dist.means.data() + k * d, grp.means.data() + g * d, d);
		kernels::axpy(1.0, dist.offsets.data() + k * m * d, grp.offsets.data() + g * m * d, m * d);
	}
	for (std::size_t g = 0; g < num_groups; ++g) {
		const double inv = 1.0 / static_cast<double>(count[g]);
		kernels::scale(inv, grp.means.data() + g * d, d);
		kernels::scale(inv, grp.offsets.data() + g * m * d, m * d);
	}
	grp.covariance = class_covariance(grp.offsets, num_groups, m);
	return out;
}

namespace {

std::vector<std::size_t> labels(const ClassDistributionSet &dist, bool states)
{
	if (dist.classes.size() != dist.num_classes())
		throw ValidationError("distribution set carries no composition labels");
	std::vector<std::size_t> out;
	for (const auto &c : dist.classes)
		out.push_back(states ? c.state : c.object);
	return out;
}

} // namespace

MarginTensor share_covariance(const ClassDistributionSet &dist, std::size_t num_objects)
{
	const auto obj = labels(dist, false);
	auto grouped = group_distributions(dist, obj, num_objects, "object");
	return MarginTensor(margin_tensor(*grouped.groups.covariance).storage(), std::move(grouped.group_of));
}

PrimitiveDistributions primitive_distributions(const ClassDistributionSet &dist, std::size_t num_states, std::size_t num_objects)
{
	return {group_distributions(dist, labels(dist, true), num_states, "state").groups,
	        group_distributions(dist, labels(dist, false), num_objects, "object").groups};
}

} // namespace plid::lid
