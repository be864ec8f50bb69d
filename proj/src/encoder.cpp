#include "plid/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "plid/errors.hpp"
#include "plid/mat_io.hpp"
#include "plid/parallel.hpp"
#include "plid/rng.hpp"

namespace plid::encoder {

namespace fs = std::filesystem;

std::vector<std::string> tokenize(std::string_view text)
{
	std::vector<std::string> tokens;
	std::string cur;
	auto flush = [&] {
		std::size_t b = 0, e = cur.size();
		while (b < e && !std::isalnum(static_cast<unsigned char>(cur[b])))
			++b;
		while (e > b && !std::isalnum(static_cast<unsigned char>(cur[e - 1])))
			--e;
		if (e > b)
			tokens.push_back(cur.substr(b, e - b));
		cur.clear();
	};
	for (char ch : text) {
		if (std::isspace(static_cast<unsigned char>(ch)))
			flush();
		else
			cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
	}
	flush();
	return tokens;
}

std::vector<double> Lexicon::token_vector(std::string_view token) const
{
	std::string lower(token);
	std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	Rng rng(fnv1a64(lower) ^ (seed_ * 0x9e3779b97f4a7c15ULL));
	const double sd = 1.0 / std::sqrt(static_cast<double>(dim_));
	std::vector<double> v(dim_);
	for (auto &x : v)
		x = rng.normal(0.0, sd);
	return v;
}

TokenSequence Lexicon::embed_tokens(std::string_view text) const
{
	auto tokens = tokenize(text);
	if (tokens.empty())
		throw ValidationError("cannot embed empty text");
	if (tokens.size() > context_length)
		tokens.resize(context_length);
	TokenSequence seq{Matrix(tokens.size(), dim_)};
	for (std::size_t i = 0; i < tokens.size(); ++i) {
		const auto v = token_vector(tokens[i]);
		std::copy(v.begin(), v.end(), seq.vectors.row(i).begin());
	}
	return seq;
}

std::vector<double> Lexicon::phrase_vector(std::string_view phrase) const
{
	const auto seq = embed_tokens(phrase);
	std::vector<double> mean(dim_);
	for (std::size_t i = 0; i < seq.length(); ++i)
		for (std::size_t j = 0; j < dim_; ++j)
			mean[j] += seq.vectors(i, j);
	for (auto &x : mean)
		x /= static_cast<double>(seq.length());
	return mean;
}

TextEncoder::TextEncoder(std::size_t embed_dim, std::size_t token_dim, std::uint64_t seed) : projection_(embed_dim, token_dim)
{
	Rng rng(fnv1a64("text-projection", seed));
	const double sd = 1.0 / std::sqrt(static_cast<double>(token_dim));
	for (auto &x : projection_.values())
		x = rng.normal(0.0, sd);
}

std::vector<double> TextEncoder::encode(const TokenSequence &seq) const
{
	if (seq.width() != token_dim())
		throw ShapeError("token width does not match encoder");
	if (seq.length() == 0)
		throw ValidationError("empty token sequence");
	std::vector<double> mean(token_dim());
	for (std::size_t i = 0; i < seq.length(); ++i)
		for (std::size_t j = 0; j < token_dim(); ++j)
			mean[j] += seq.vectors(i, j);
	for (auto &x : mean)
		x /= static_cast<double>(seq.length());
	std::vector<double> out(embed_dim());
	for (std::size_t r = 0; r < embed_dim(); ++r)
		out[r] = dot(projection_.row(r), mean);
	return normalized(out, norm_floor);
}

ImageViews augment_views(std::span<const double> anchor, std::size_t n, std::uint64_t seed, double noise)
{
	ImageViews out{normalized(anchor, norm_floor), Matrix(n, anchor.size())};
	Rng rng(seed);
	for (std::size_t i = 0; i < n; ++i) {
		std::vector<double> v(anchor.begin(), anchor.end());
		for (auto &x : v)
			x += rng.normal(0.0, noise);
		const auto u = normalized(v, norm_floor);
		std::copy(u.begin(), u.end(), out.views.row(i).begin());
	}
	return out;
}

std::string to_string(BackendKind k)
{
	return k == BackendKind::synthetic ? "synthetic" : "precomputed";
}

BackendKind parse_backend(const std::string &s)
{
	if (s == "synthetic")
		return BackendKind::synthetic;
	if (s == "precomputed")
		return BackendKind::precomputed;
	throw ConfigError("unknown backend '" + s + "' (expected synthetic or precomputed)");
}

std::vector<double> Backend::encode_sentence(std::string_view text) const
{
	return text_.encode(lexicon_.embed_tokens(text));
}

// ---------------------------------------------------------------------------

SyntheticBackend::SyntheticBackend(const corpus::Dataset &ds, std::size_t embed_dim, std::uint64_t seed)
    : Backend(embed_dim, seed), vocab_(ds.vocab), corpus_(ds.descriptions), spec_(ds.synthetic.value_or(corpus::SyntheticSpec{}))
{
	for (const auto &r : ds.samples)
		labels_[r.image_key] = r.label();
}

Matrix SyntheticBackend::description_embeddings(const corpus::Composition &c, bool allow_templates) const
{
	std::vector<std::string> texts;
	if (corpus_.contains(c))
		texts = corpus_.at(c);
	else if (allow_templates)
		texts = corpus::template_descriptions(vocab_.states.at(c.state), vocab_.objects.at(c.object),
		                                      std::max<std::size_t>(corpus_.per_class(), 1), spec_.seed);
	else
		throw ValidationError("missing descriptions for " + corpus::composition_name(vocab_, c));
	Matrix out(texts.size(), embed_dim());
	for (std::size_t m = 0; m < texts.size(); ++m) {
		const auto e = encode_sentence(texts[m]);
		std::copy(e.begin(), e.end(), out.row(m).begin());
	}
	return out;
}

std::vector<double> SyntheticBackend::state_latent(std::size_t s) const
{
	const auto &name = vocab_.states.at(s);
	auto v = lexicon_.phrase_vector(name);
	const auto offset = lexicon_.token_vector("visual-state:" + name);
	for (std::size_t j = 0; j < v.size(); ++j)
		v[j] += spec_.visual_offset * offset[j];
	return v;
}

std::vector<double> SyntheticBackend::object_latent(std::size_t o) const
{
	const auto &name = vocab_.objects.at(o);
	auto v = lexicon_.phrase_vector(name);
	const auto offset = lexicon_.token_vector("visual-object:" + name);
	for (std::size_t j = 0; j < v.size(); ++j)
		v[j] += spec_.visual_offset * offset[j];
	return v;
}

std::vector<double> SyntheticBackend::image_latent(const std::string &image_key) const
{
	auto it = labels_.find(image_key);
	if (it == labels_.end())
		throw ValidationError("unknown image_key '" + image_key + "'");
	auto v = state_latent(it->second.state);
	const auto o = object_latent(it->second.object);
	Rng rng(fnv1a64(image_key, spec_.seed ^ lexicon_.seed()));
	const double sd = spec_.latent_noise / std::sqrt(static_cast<double>(v.size()));
	for (std::size_t j = 0; j < v.size(); ++j)
		v[j] += o[j] + rng.normal(0.0, sd);
	return v;
}

std::vector<double> SyntheticBackend::encode_latent(std::span<const double> latent) const
{
	std::vector<double> out(embed_dim());
	for (std::size_t r = 0; r < embed_dim(); ++r)
		out[r] = dot(text_.projection().row(r), latent);
	return normalized(out, norm_floor);
}

std::vector<double> SyntheticBackend::encode_image(const std::string &image_key) const
{
	return encode_latent(image_latent(image_key));
}

ImageViews SyntheticBackend::image_views(const std::string &image_key, std::size_t n, std::uint64_t seed) const
{
	const auto latent = image_latent(image_key);
	ImageViews out{encode_latent(latent), Matrix(n, embed_dim())};
	Rng rng(fnv1a64(image_key, seed));
	for (std::size_t i = 0; i < n; ++i) {
		auto v = latent;
		for (auto &x : v)
			x += rng.normal(0.0, 0.05);
		const auto e = encode_latent(v);
		std::copy(e.begin(), e.end(), out.views.row(i).begin());
	}
	return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string desc_file(const corpus::Composition &c)
{
	return "text_desc_" + std::to_string(c.state) + "_" + std::to_string(c.object) + ".mat";
}

} // namespace

std::size_t precomputed_embed_dim(const fs::path &root)
{
	return mat_io::read(root / "img_train.mat").cols();
}

PrecomputedBackend::PrecomputedBackend(const corpus::Dataset &ds, const fs::path &root, std::uint64_t seed)
    : Backend(precomputed_embed_dim(root), seed), root_(root)
{
	const std::size_t d = embed_dim();
	for (auto split : {corpus::SampleSplit::train, corpus::SampleSplit::val, corpus::SampleSplit::test}) {
		const auto records = ds.samples_in(split);
		const auto path = root / ("img_" + corpus::to_string(split) + ".mat");
		if (records.empty() && !fs::exists(path))
			continue;
		const Matrix m = mat_io::read(path);
		if (m.rows() != records.size() || m.cols() != d)
			throw ValidationError(path.filename().string() + ": expected " + std::to_string(records.size()) + "x" + std::to_string(d) +
			                      " rows aligned with samples.csv, got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
		for (std::size_t i = 0; i < records.size(); ++i)
			images_[records[i].image_key] = normalized(m.row(i), norm_floor);
	}
	for (const auto &entry : fs::directory_iterator(root)) {
		const auto name = entry.path().filename().string();
		if (name.rfind("text_desc_", 0) != 0 || entry.path().extension() != ".mat")
			continue;
		const auto stem = entry.path().stem().string().substr(10);
		const auto us = stem.find('_');
		if (us == std::string::npos)
			throw ValidationError("bad description matrix name: " + name);
		const corpus::Composition c{std::stoul(stem.substr(0, us)), std::stoul(stem.substr(us + 1))};
		Matrix m = mat_io::read(entry.path());
		if (m.cols() != d)
			throw ValidationError(name + ": width " + std::to_string(m.cols()) + " differs from image width " + std::to_string(d));
		for (std::size_t r = 0; r < m.rows(); ++r) {
			const auto u = normalized(m.row(r), norm_floor);
			std::copy(u.begin(), u.end(), m.row(r).begin());
		}
		descriptions_.emplace(c, std::move(m));
	}
}

bool PrecomputedBackend::has_descriptions(const corpus::Composition &c) const
{
	return descriptions_.count(c) != 0;
}

Matrix PrecomputedBackend::description_embeddings(const corpus::Composition &c, bool) const
{
	auto it = descriptions_.find(c);
	if (it == descriptions_.end())
		throw LoadError("missing file: " + (root_ / desc_file(c)).string());
	return it->second;
}

std::vector<double> PrecomputedBackend::encode_image(const std::string &image_key) const
{
	auto it = images_.find(image_key);
	if (it == images_.end())
		throw ValidationError("unknown image_key '" + image_key + "'");
	return it->second;
}

ImageViews PrecomputedBackend::image_views(const std::string &image_key, std::size_t n, std::uint64_t seed) const
{
	return augment_views(encode_image(image_key), n, fnv1a64(image_key, seed), 0.2 / std::sqrt(static_cast<double>(embed_dim())));
}

std::unique_ptr<Backend> make_backend(BackendKind kind, const corpus::Dataset &ds, const fs::path &root, std::size_t embed_dim,
                                      std::uint64_t seed)
{
	if (kind == BackendKind::synthetic)
		return std::make_unique<SyntheticBackend>(ds, embed_dim, seed);
	auto b = std::make_unique<PrecomputedBackend>(ds, root, seed);
	if (b->embed_dim() != embed_dim)
		throw ConfigError("embed_dim " + std::to_string(embed_dim) + " does not match precomputed width " + std::to_string(b->embed_dim()));
	return b;
}

void export_precomputed(const Backend &backend, const corpus::Dataset &ds, const fs::path &root)
{
	fs::create_directories(root);
	for (const auto &[c, texts] : ds.descriptions.texts)
		mat_io::write(root / desc_file(c), backend.description_embeddings(c, false));
	for (auto split : {corpus::SampleSplit::train, corpus::SampleSplit::val, corpus::SampleSplit::test}) {
		const auto records = ds.samples_in(split);
		Matrix m(records.size(), backend.embed_dim());
		parallel_for(records.size(), [&](std::size_t i) {
			const auto e = backend.encode_image(records[i].image_key);
			std::copy(e.begin(), e.end(), m.row(i).begin());
		});
		mat_io::write(root / ("img_" + corpus::to_string(split) + ".mat"), m);
	}
}

} // namespace plid::encoder
