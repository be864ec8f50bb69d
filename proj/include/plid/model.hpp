#pragma once

#include <string>
#include <vector>

#include "plid/autodiff.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/lid.hpp"
#include "plid/rng.hpp"
#include "plid/vlpd.hpp"

namespace plid {

/// Every learnable tensor. The encoder surrogate is not part of it.
struct ModelParams {
	lid::SoftPrompt prompt;
	lid::CrossAttention text_attention;
	lid::CrossAttention visual_attention;
	vlpd::DecompositionHeads heads;

	static ModelParams initialize(const encoder::Backend &backend, const corpus::Vocabulary &vocab, std::size_t context_length, Rng &rng);

	/// Stable order shared by tensors(), names() and ParamVars::all().
	std::vector<Matrix *> tensors();
	std::vector<const Matrix *> tensors() const;
	static std::vector<std::string> names();

	friend bool operator==(const ModelParams &a, const ModelParams &b);
};

struct ParamVars {
	lid::PromptVars prompt;
	lid::AttentionVars text_attention;
	lid::AttentionVars visual_attention;
	vlpd::HeadVars state_head;
	vlpd::HeadVars object_head;

	static ParamVars parameters(const ModelParams &p);
	static ParamVars constants(const ModelParams &p);
	std::vector<ad::Var> all() const;
};

/// Encoded images of one minibatch.
struct Batch {
	Matrix anchors;                         // B×d
	Matrix support;                         // B·(N+1)×d, anchor first in each block
	std::vector<corpus::Composition> labels; // may be empty when scoring

	std::size_t size() const { return anchors.rows(); }
};

/// Encodes records into a batch with N views per image.
Batch make_batch(const encoder::Backend &backend, const std::vector<corpus::SampleRecord> &records, std::size_t views,
                 std::uint64_t view_seed);

/// Rows idx of a batch (anchors, their support blocks and labels).
Batch select(const Batch &batch, const std::vector<std::size_t> &idx);

} // namespace plid
