#include "plid/model.hpp"

#include <algorithm>

#include "plid/errors.hpp"
#include "plid/parallel.hpp"

namespace plid {

ModelParams ModelParams::initialize(const encoder::Backend &backend, const corpus::Vocabulary &vocab, std::size_t context_length, Rng &rng)
{
	const std::size_t d = backend.embed_dim();
	ModelParams p{lid::SoftPrompt::initialize(backend.lexicon(), vocab, context_length), lid::CrossAttention::identity(d),
	              lid::CrossAttention::identity(d), {}};
	p.heads.state = vlpd::ProjectionHead::near_identity(d, rng);
	p.heads.object = vlpd::ProjectionHead::near_identity(d, rng);
	return p;
}

std::vector<Matrix *> ModelParams::tensors()
{
	return {&prompt.context,        &prompt.state_table,      &prompt.object_table,    &text_attention.query,
	        &text_attention.key,    &text_attention.value,    &text_attention.output,  &visual_attention.query,
	        &visual_attention.key,  &visual_attention.value,  &visual_attention.output, &heads.state.w1,
	        &heads.state.b1,        &heads.state.w2,          &heads.state.b2,          &heads.object.w1,
	        &heads.object.b1,       &heads.object.w2,         &heads.object.b2};
}

std::vector<const Matrix *> ModelParams::tensors() const
{
	auto mut = const_cast<ModelParams *>(this)->tensors();
	return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::names()
{
	return {"prompt_context",   "prompt_states",    "prompt_objects",    "tfe_query",       "tfe_key",
	        "tfe_value",        "tfe_output",       "vfe_query",         "vfe_key",         "vfe_value",
	        "vfe_output",       "head_state_w1",    "head_state_b1",     "head_state_w2",   "head_state_b2",
	        "head_object_w1",   "head_object_b1",   "head_object_w2",    "head_object_b2"};
}

bool operator==(const ModelParams &a, const ModelParams &b)
{
	const auto ta = a.tensors(), tb = b.tensors();
	for (std::size_t i = 0; i < ta.size(); ++i)
		if (!(*ta[i] == *tb[i]))
			return false;
	return true;
}

ParamVars ParamVars::parameters(const ModelParams &p)
{
	return {lid::PromptVars::parameters(p.prompt), lid::AttentionVars::parameters(p.text_attention),
	        lid::AttentionVars::parameters(p.visual_attention), vlpd::HeadVars::parameters(p.heads.state),
	        vlpd::HeadVars::parameters(p.heads.object)};
}

ParamVars ParamVars::constants(const ModelParams &p)
{
	return {lid::PromptVars::constants(p.prompt), lid::AttentionVars::constants(p.text_attention),
	        lid::AttentionVars::constants(p.visual_attention), vlpd::HeadVars::constants(p.heads.state),
	        vlpd::HeadVars::constants(p.heads.object)};
}

std::vector<ad::Var> ParamVars::all() const
{
	return {prompt.context,          prompt.state_table,       prompt.object_table,       text_attention.query,
	        text_attention.key,      text_attention.value,     text_attention.output,     visual_attention.query,
	        visual_attention.key,    visual_attention.value,   visual_attention.output,   state_head.w1,
	        state_head.b1,           state_head.w2,            state_head.b2,             object_head.w1,
	        object_head.b1,          object_head.w2,           object_head.b2};
}

Batch make_batch(const encoder::Backend &backend, const std::vector<corpus::SampleRecord> &records, std::size_t views,
                 std::uint64_t view_seed)
{
	const std::size_t d = backend.embed_dim(), block = views + 1;
	Batch b{Matrix(records.size(), d), Matrix(records.size() * block, d), {}};
	parallel_for(records.size(), [&](std::size_t i) {
		const auto iv = backend.image_views(records[i].image_key, views, view_seed);
		std::copy(iv.anchor.begin(), iv.anchor.end(), b.anchors.row(i).begin());
		const auto sup = lid::visual_support(iv.anchor, iv.views);
		std::copy(sup.values().begin(), sup.values().end(), b.support.data() + i * block * d);
	});
	for (const auto &r : records)
		b.labels.push_back(r.label());
	return b;
}

Batch select(const Batch &batch, const std::vector<std::size_t> &idx)
{
	const std::size_t d = batch.anchors.cols();
	const std::size_t block = batch.size() ? batch.support.rows() / batch.size() : 0;
	Batch out{Matrix(idx.size(), d), Matrix(idx.size() * block, d), {}};
	for (std::size_t i = 0; i < idx.size(); ++i) {
		if (idx[i] >= batch.size())
			throw ShapeError("select: row index out of range");
		std::copy_n(batch.anchors.data() + idx[i] * d, d, out.anchors.data() + i * d);
		std::copy_n(batch.support.data() + idx[i] * block * d, block * d, out.support.data() + i * block * d);
		if (!batch.labels.empty())
			out.labels.push_back(batch.labels[idx[i]]);
	}
	return out;
}

} // namespace plid
