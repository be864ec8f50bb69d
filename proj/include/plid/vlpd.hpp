#pragma once

// Visual-language primitive decomposition: state/object projection heads,
// grouped text targets, primitive logits and the recomposed logit matrix.

#include <cstddef>
#include <span>
#include <vector>

#include "plid/autodiff.hpp"
#include "plid/corpus.hpp"
#include "plid/matrix.hpp"
#include "plid/rng.hpp"

namespace plid::vlpd {

/// f(v) = normalize(v + gelu(v·W1 + b1)·W2 + b2).
struct ProjectionHead {
	Matrix w1, b1, w2, b2;

	/// W1 ~ N(0, 1/d), W2 ~ N(0, init_scale²/d), zero biases: starts near identity.
	static ProjectionHead near_identity(std::size_t dim, Rng &rng, double init_scale = 0.1);
	/// W2 = 0, b2 = 0: exactly f(v) = normalize(v).
	static ProjectionHead identity(std::size_t dim);
	std::size_t dim() const { return w1.rows(); }
};

struct HeadVars {
	ad::Var w1, b1, w2, b2;

	static HeadVars constants(const ProjectionHead &h);
	static HeadVars parameters(const ProjectionHead &h);
};

struct DecompositionHeads {
	ProjectionHead state;
	ProjectionHead object;
};

/// Applies a head row-wise.
ad::Var apply_head(const HeadVars &head, const ad::Var &v);
std::vector<double> apply_head(const ProjectionHead &head, std::span<const double> v);

/// Rows of `group` (num_groups×C) average the class rows sharing a primitive.
/// Only classes with include[c] set contribute.
Matrix grouping_matrix(const std::vector<corpus::Composition> &classes, const std::vector<bool> &include, std::size_t num_groups, bool by_state);

/// Unit-norm grouped means normalize(G·T). Throws if a group has no member.
ad::Var grouped_targets(const ad::Var &means, const Matrix &grouping, const char *what);

struct PrimitiveLogits {
	std::vector<double> state;
	std::vector<double> object;
};

/// h_s = cos(f_s(v), normalize(mean_{Y_s} t_y)); h_o likewise. `seen` restricts
/// the groups to seen classes; pass an empty vector to group over all classes.
PrimitiveLogits primitive_logits(std::span<const double> v, const DecompositionHeads &heads, const Matrix &class_means,
                                 const std::vector<corpus::Composition> &classes, const std::vector<bool> &seen, std::size_t num_states,
                                 std::size_t num_objects);

/// H[i, j] = h_state[i] + h_object[j].
Matrix recompose(std::span<const double> h_state, std::span<const double> h_object);

/// Gathers recomposed logits at each class's (s, o): out[b, c] = hs[b, s_c] + ho[b, o_c].
ad::Var gather_recomposed(const ad::Var &h_state, const ad::Var &h_object, const std::vector<corpus::Composition> &classes);

} // namespace plid::vlpd
