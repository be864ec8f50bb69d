#include "plid/vlpd.hpp"

#include <cmath>

#include "plid/encoder.hpp"
#include "plid/errors.hpp"

namespace plid::vlpd {

ProjectionHead ProjectionHead::near_identity(std::size_t dim, Rng &rng, double init_scale)
{
	ProjectionHead h{Matrix(dim, dim), Matrix(1, dim), Matrix(dim, dim), Matrix(1, dim)};
	const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
	for (auto &x : h.w1.values())
		x = rng.normal(0.0, sd);
	for (auto &x : h.w2.values())
		x = rng.normal(0.0, init_scale * sd);
	return h;
}

ProjectionHead ProjectionHead::identity(std::size_t dim)
{
	return {Matrix(dim, dim), Matrix(1, dim), Matrix(dim, dim), Matrix(1, dim)};
}

HeadVars HeadVars::constants(const ProjectionHead &h)
{
	return {ad::constant(h.w1), ad::constant(h.b1), ad::constant(h.w2), ad::constant(h.b2)};
}

HeadVars HeadVars::parameters(const ProjectionHead &h)
{
	return {ad::parameter(h.w1), ad::parameter(h.b1), ad::parameter(h.w2), ad::parameter(h.b2)};
}

ad::Var apply_head(const HeadVars &head, const ad::Var &v)
{
	const auto hidden = ad::gelu(ad::add_row(ad::matmul(v, head.w1), head.b1));
	const auto residual = ad::add_row(ad::matmul(hidden, head.w2), head.b2);
	return ad::row_normalize(ad::add(v, residual), encoder::norm_floor);
}

std::vector<double> apply_head(const ProjectionHead &head, std::span<const double> v)
{
	return apply_head(HeadVars::constants(head), ad::constant(Matrix::row_vector(v))).value().values();
}

Matrix grouping_matrix(const std::vector<corpus::Composition> &classes, const std::vector<bool> &include, std::size_t num_groups, bool by_state)
{
	Matrix g(num_groups, classes.size());
	std::vector<double> count(num_groups);
	for (std::size_t c = 0; c < classes.size(); ++c) {
		if (!include.empty() && !include[c])
			continue;
		const std::size_t k = by_state ? classes[c].state : classes[c].object;
		if (k >= num_groups)
			throw ShapeError("grouping_matrix: primitive id out of range");
		g(k, c) = 1.0;
		count[k] += 1.0;
	}
	for (std::size_t k = 0; k < num_groups; ++k)
		if (count[k] > 0)
			for (auto &x : g.row(k))
				x /= count[k];
	return g;
}

ad::Var grouped_targets(const ad::Var &means, const Matrix &grouping, const char *what)
{
	for (std::size_t k = 0; k < grouping.rows(); ++k) {
		bool any = false;
		for (double x : grouping.row(k))
			any = any || x != 0.0;
		if (!any)
			throw ValidationError(std::string("no composition covers ") + what + " " + std::to_string(k));
	}
	return ad::row_normalize(ad::matmul(ad::constant(grouping), means), encoder::norm_floor);
}

PrimitiveLogits primitive_logits(std::span<const double> v, const DecompositionHeads &heads, const Matrix &class_means,
                                 const std::vector<corpus::Composition> &classes, const std::vector<bool> &seen, std::size_t num_states,
                                 std::size_t num_objects)
{
	if (class_means.rows() != classes.size())
		throw ShapeError("primitive_logits: one mean per class required");
	const auto means = ad::constant(class_means);
	const auto ts = grouped_targets(means, grouping_matrix(classes, seen, num_states, true), "state");
	const auto to = grouped_targets(means, grouping_matrix(classes, seen, num_objects, false), "object");
	const auto x = ad::constant(Matrix::row_vector(v));
	const auto fs = apply_head(HeadVars::constants(heads.state), x);
	const auto fo = apply_head(HeadVars::constants(heads.object), x);
	return {ad::matmul_bt(fs, ts).value().values(), ad::matmul_bt(fo, to).value().values()};
}

Matrix recompose(std::span<const double> h_state, std::span<const double> h_object)
{
	if (h_state.empty() || h_object.empty())
		throw ShapeError("recompose: primitive logit vectors must be non-empty");
	Matrix h(h_state.size(), h_object.size());
	for (std::size_t i = 0; i < h_state.size(); ++i)
		for (std::size_t j = 0; j < h_object.size(); ++j)
			h(i, j) = h_state[i] + h_object[j];
	return h;
}

ad::Var gather_recomposed(const ad::Var &h_state, const ad::Var &h_object, const std::vector<corpus::Composition> &classes)
{
	if (h_state.rows() != h_object.rows())
		throw ShapeError("gather_recomposed: batch sizes differ");
	Matrix sel_s(h_state.cols(), classes.size()), sel_o(h_object.cols(), classes.size());
	for (std::size_t c = 0; c < classes.size(); ++c) {
		if (classes[c].state >= h_state.cols() || classes[c].object >= h_object.cols())
			throw ShapeError("gather_recomposed: class outside primitive logits");
		sel_s(classes[c].state, c) = 1.0;
		sel_o(classes[c].object, c) = 1.0;
	}
	return ad::add(ad::matmul(h_state, ad::constant(sel_s)), ad::matmul(h_object, ad::constant(sel_o)));
}

} // namespace plid::vlpd
