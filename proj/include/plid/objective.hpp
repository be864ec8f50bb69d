#pragma once

// Losses, logit fusion and the CSP-style cosine scorer.

#include <optional>
#include <span>
#include <vector>

#include "plid/autodiff.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/lid.hpp"
#include "plid/model.hpp"
#include "plid/rng.hpp"

namespace plid::objective {

/// cos(v, t_c) per class; inputs are unit-norm so this is a dot product.
std::vector<double> csp_logits(std::span<const double> v, const Matrix &means);

/// −log( exp(h_y/τ) / Σ_k exp((h_k + m_k)/τ) ), evaluated with max subtraction.
double loss_upper_bound(std::span<const double> logits, std::span<const double> margins, std::size_t target, double tau);

struct BetaPrior {
	double a = 1.0;
	double b = 9.0;

	double mean() const { return a / (a + b); }
	void validate() const;
};

enum class Mode { train, eval };

/// Train: one Beta(a, b) draw. Eval: a/(a+b).
double sample_lambda(const BetaPrior &prior, Rng &rng, Mode mode);

/// (1 − λ)·h_comp + λ·h_rc elementwise.
std::vector<double> mix_logits(std::span<const double> h_comp, std::span<const double> h_rc, double lambda);
ad::Var mix_logits(const ad::Var &h_comp, const ad::Var &h_rc, double lambda);

struct LossReport {
	double loss_y = 0.0;
	double loss_s = 0.0;
	double loss_o = 0.0;
	double total = 0.0;
	double w_s = 0.0;
	double w_o = 0.0;
};

/// Class-side inputs that stay fixed between margin refreshes.
struct ClassContext {
	std::vector<corpus::Composition> classes;
	std::vector<bool> seen; // groups for the primitive targets use seen classes only
	std::size_t support_size = 0;
	Matrix descriptions; // (C·M)×d, class blocks of description embeddings
	std::size_t num_states = 0;
	std::size_t num_objects = 0;
	std::optional<lid::MarginTensor> composition_margins;
	std::optional<lid::MarginTensor> state_margins;
	std::optional<lid::MarginTensor> object_margins;

	std::size_t num_classes() const { return classes.size(); }
	std::size_t class_index(const corpus::Composition &c) const;
};

/// max_support > 0 keeps the first max_support descriptions of each class.
ClassContext make_class_context(const encoder::Backend &backend, const std::vector<corpus::Composition> &classes,
                                const corpus::CompositionSplit &split, const corpus::Vocabulary &vocab, bool allow_templates,
                                std::size_t max_support = 0);

/// Rebuilds the distributions for the current parameters and the compositional
/// (dense, or object-shared above dense_cov_limit classes) and primitive margin tensors.
void refresh_margins(ClassContext &ctx, const ModelParams &params, const Matrix &text_projection, std::size_t dense_cov_limit);

struct DropoutMasks {
	Matrix text;   // C×d or empty
	Matrix visual; // B×d or empty
};

struct Forward {
	ad::Var v;        // B×d enhanced image features
	ad::Var means;    // C×d class means t_y
	ad::Var h_comp;   // B×C
	ad::Var f_state;  // B×d
	ad::Var f_object; // B×d
	ad::Var h_state;  // B×|S|
	ad::Var h_object; // B×|O|
	ad::Var h_rc;     // B×C, recomposed logits gathered at each class
	ad::Var h_mixed;  // B×C
	double lambda = 0.0;
	bool decomposed = false;
};

Forward forward(const ParamVars &params, const Batch &batch, const ClassContext &ctx, const Matrix &text_projection, bool use_vlpd,
                double lambda, const DropoutMasks &masks = {});

struct LossOptions {
	double tau = 0.01;
	double w_s = 0.1;
	double w_o = 0.1;
	bool use_margins = true;
	bool use_vlpd = true;
	double lambda = 0.1;
};

struct LossTerms {
	Forward fwd;
	ad::Var loss_y, loss_s, loss_o, total;
	LossReport report;
};

/// L_y on mixed logits with compositional margins, L_s and L_o on primitive
/// logits with primitive margins, total = L_y + w_s·L_s + w_o·L_o.
/// Throws NumericError naming the first non-finite term.
LossTerms total_loss(const ParamVars &params, const Batch &batch, const ClassContext &ctx, const Matrix &text_projection,
                     const LossOptions &options, const DropoutMasks &masks = {});

} // namespace plid::objective
