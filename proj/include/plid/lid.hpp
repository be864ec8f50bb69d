#pragma once

// Language-informed class distributions: soft prompt assembly, cross-attention
// feature enhancement, support points, per-dimension cross-class covariance and
// the pairwise margin tensor.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "plid/autodiff.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/margin_view.hpp"
#include "plid/matrix.hpp"
#include "plid/rng.hpp"

namespace plid::lid {

inline constexpr std::size_t default_context_length = 8;

struct SoftPrompt {
	Matrix context;      // L×d_tok, shared by all classes
	Matrix state_table;  // |S|×d_tok
	Matrix object_table; // |O|×d_tok

	std::size_t context_length() const { return context.rows(); }

	/// Context from the "a photo of" token vectors repeated cyclically to fill
	/// L slots; primitive tables from the token vectors of their names.
	static SoftPrompt initialize(const encoder::Lexicon &lexicon, const corpus::Vocabulary &vocab,
	                             std::size_t context_length = default_context_length);
};

/// [p_1 .. p_L, s, o]. Throws ShapeError for out-of-range ids.
encoder::TokenSequence compose_class_tokens(const SoftPrompt &prompt, std::size_t state, std::size_t object);

struct PromptVars {
	ad::Var context, state_table, object_table;

	static PromptVars constants(const SoftPrompt &p);
	static PromptVars parameters(const SoftPrompt &p);
};

/// Unit-norm class queries q_y = normalize(P · meanpool([p_1..p_L, s, o])), one row per class.
ad::Var class_queries(const PromptVars &prompt, const Matrix &text_projection, const std::vector<corpus::Composition> &classes);

/// Single-head cross attention with learnable row-vector projections
/// (x·W). Identity projections give softmax(q·Sᵀ/√d)·S over the raw support.
struct CrossAttention {
	Matrix query;
	Matrix key;
	Matrix value;
	Matrix output;

	static CrossAttention identity(std::size_t dim);
	std::size_t dim() const { return query.rows(); }
};

struct AttentionVars {
	ad::Var query, key, value, output;

	static AttentionVars constants(const CrossAttention &a);
	static AttentionVars parameters(const CrossAttention &a);
};

/// Inverted dropout mask: entries 0 with probability rate, else 1/(1 − rate).
/// rate ≥ 1 yields all zeros.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng &rng);

/// Row-wise enhancement: out_i = normalize(q_i + drop(attn(q_i → support block i)·W_o)).
/// support holds rows·m rows; block i is rows [i·m, (i+1)·m). mask may be empty (no dropout).
ad::Var enhance(const ad::Var &queries, const ad::Var &support, const AttentionVars &attention, const Matrix &mask = {});

/// Text feature enhancement of one class query over its description embeddings.
std::vector<double> tfe(std::span<const double> query, const Matrix &support, const CrossAttention &attention, double dropout = 0.0,
                        Rng *rng = nullptr);

/// Visual feature enhancement; the support is the anchor followed by the views.
std::vector<double> vfe(std::span<const double> anchor, const Matrix &views, const CrossAttention &attention, double dropout = 0.0,
                        Rng *rng = nullptr);

/// Support rows of a query followed by its views: (N+1)×d.
Matrix visual_support(std::span<const double> anchor, const Matrix &views);

/// Pairwise per-dimension statistics over `groups` classes, stored
/// groups×groups×dim with the feature dimension innermost.
class PairTensor {
public:
	PairTensor() = default;
	PairTensor(std::size_t groups, std::size_t dim) : groups_(groups), dim_(dim), data_(groups * groups * dim, 0.0) {}

	std::size_t groups() const { return groups_; }
	std::size_t dim() const { return dim_; }
	/// Entry (feature j, row k, column y).
	double at(std::size_t j, std::size_t k, std::size_t y) const { return data_[(k * groups_ + y) * dim_ + j]; }
	double &at(std::size_t j, std::size_t k, std::size_t y) { return data_[(k * groups_ + y) * dim_ + j]; }
	const double *pair(std::size_t k, std::size_t y) const { return data_.data() + (k * groups_ + y) * dim_; }
	double *pair(std::size_t k, std::size_t y) { return data_.data() + (k * groups_ + y) * dim_; }
	std::size_t bytes() const { return data_.size() * sizeof(double); }
	const std::vector<double> &values() const { return data_; }

	/// C×C slice for one feature dimension.
	Matrix slice(std::size_t j) const;

	friend bool operator==(const PairTensor &, const PairTensor &) = default;

private:
	std::size_t groups_ = 0;
	std::size_t dim_ = 0;
	std::vector<double> data_;
};

using Covariance = PairTensor;

/// A[j,k,y] = Σ_j[k,k] + Σ_j[y,y] − Σ_j[k,y] − Σ_j[y,k], optionally shared
/// through a class→group map.
class MarginTensor {
public:
	MarginTensor() = default;
	MarginTensor(PairTensor a, std::vector<std::size_t> group_of = {});

	std::size_t classes() const { return group_of_.empty() ? a_.groups() : group_of_.size(); }
	std::size_t dim() const { return a_.dim(); }
	double at(std::size_t j, std::size_t k, std::size_t y) const;
	const PairTensor &storage() const { return a_; }
	const std::vector<std::size_t> &group_of() const { return group_of_; }
	bool shared() const { return !group_of_.empty(); }
	std::size_t bytes() const { return a_.bytes(); }

	/// View valid while this tensor lives.
	MarginView view() const;

private:
	PairTensor a_;
	std::vector<std::size_t> group_of_;
};

struct ClassDistributionSet {
	std::vector<corpus::Composition> classes; // empty for primitive-level sets
	std::size_t support_size = 0; // M
	Matrix means;                 // C×d, rows t_y
	Matrix offsets;               // (C·M)×d, block c holds D^(c)
	std::optional<Covariance> covariance;

	std::size_t num_classes() const { return means.rows(); }
	std::size_t dim() const { return means.cols(); }
	/// (C·M)×d support points t_c + D^(c)[m].
	Matrix support_points() const;
};

/// Σ_j[k,y] = (1/M) Σ_m off_k[m,j] · off_y[m,j] over blocks of M rows.
Covariance class_covariance(const Matrix &offsets, std::size_t classes, std::size_t support_size);

/// Means via compose → encode → TFE (dropout off); offsets are the stacked
/// description embeddings. All blocks must have the same row count.
ClassDistributionSet build_distributions(const SoftPrompt &prompt, const CrossAttention &attention, const Matrix &text_projection,
                                         const std::vector<Matrix> &descriptions, const std::vector<corpus::Composition> &classes,
                                         bool with_covariance = true);

MarginTensor margin_tensor(const Covariance &cov);

/// Σ_j v_j² · A[j,k,y] / (2τ).
double margin_quadratic(std::span<const double> v, const MarginTensor &a, std::size_t k, std::size_t y, double tau);

/// Class-level distributions grouped by a label map (state or object), with
/// t_g and D^(g) averaged over the members of each group.
struct GroupedDistributions {
	ClassDistributionSet groups;
	std::vector<std::size_t> group_of; // class index → group
};

GroupedDistributions group_distributions(const ClassDistributionSet &dist, std::span<const std::size_t> label_of, std::size_t num_groups,
                                         const char *what);

/// Object-level covariance shared by all compositions with the same object;
/// storage is |O|×|O|×d.
MarginTensor share_covariance(const ClassDistributionSet &dist, std::size_t num_objects);

struct PrimitiveDistributions {
	ClassDistributionSet states;
	ClassDistributionSet objects;
};

PrimitiveDistributions primitive_distributions(const ClassDistributionSet &dist, std::size_t num_states, std::size_t num_objects);

} // namespace plid::lid
