#pragma once

// Deterministic stand-ins for the frozen text and visual encoders, plus an
// adapter that serves precomputed embeddings from matrix containers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "plid/corpus.hpp"
#include "plid/matrix.hpp"

namespace plid::encoder {

inline constexpr std::size_t context_length = 77;
inline constexpr double norm_floor = 1e-8;

/// Token vectors, one row per token (length ≤ context_length).
struct TokenSequence {
	Matrix vectors;

	std::size_t length() const { return vectors.rows(); }
	std::size_t width() const { return vectors.cols(); }
};

/// Lowercased whitespace tokens with surrounding punctuation stripped.
std::vector<std::string> tokenize(std::string_view text);

/// Maps each token to a fixed Gaussian vector seeded by the hash of its
/// lowercase form.
class Lexicon {
public:
	Lexicon(std::size_t token_dim, std::uint64_t seed) : dim_(token_dim), seed_(seed) {}

	std::size_t dim() const { return dim_; }
	std::uint64_t seed() const { return seed_; }

	std::vector<double> token_vector(std::string_view token) const;
	/// Rows for each token of text; throws on empty text.
	TokenSequence embed_tokens(std::string_view text) const;
	/// Mean of the token vectors of a (possibly multi-word) name.
	std::vector<double> phrase_vector(std::string_view phrase) const;

private:
	std::size_t dim_;
	std::uint64_t seed_;
};

/// normalize(P · meanpool(tokens)) with a fixed seeded d×d_tok projection P.
class TextEncoder {
public:
	TextEncoder(std::size_t embed_dim, std::size_t token_dim, std::uint64_t seed);

	std::size_t embed_dim() const { return projection_.rows(); }
	std::size_t token_dim() const { return projection_.cols(); }
	const Matrix &projection() const { return projection_; }

	std::vector<double> encode(const TokenSequence &seq) const;

private:
	Matrix projection_;
};

struct ImageViews {
	std::vector<double> anchor;
	Matrix views; // N×d
};

/// Seeded unit-norm perturbations of an embedding: normalize(anchor + ξ) with ξ_j ~ N(0, noise²).
ImageViews augment_views(std::span<const double> anchor, std::size_t n, std::uint64_t seed, double noise = 0.05);

enum class BackendKind { synthetic, precomputed };

std::string to_string(BackendKind k);
BackendKind parse_backend(const std::string &s);

/// Frozen encoder stack for one dataset: text side (lexicon, projection,
/// description embeddings) and image side (anchor embeddings and views).
class Backend {
public:
	virtual ~Backend() = default;

	virtual BackendKind kind() const = 0;
	std::size_t embed_dim() const { return text_.embed_dim(); }
	const Lexicon &lexicon() const { return lexicon_; }
	const TextEncoder &text_encoder() const { return text_; }

	/// Embeds a sentence through the surrogate text encoder.
	std::vector<double> encode_sentence(std::string_view text) const;

	/// M×d description embeddings for a class; rows follow the sorted descriptions.
	/// Classes absent from the corpus fall back to template descriptions when allow_templates is set.
	virtual Matrix description_embeddings(const corpus::Composition &c, bool allow_templates) const = 0;
	virtual bool has_descriptions(const corpus::Composition &c) const = 0;

	virtual std::vector<double> encode_image(const std::string &image_key) const = 0;
	virtual ImageViews image_views(const std::string &image_key, std::size_t n, std::uint64_t seed) const = 0;

protected:
	Backend(std::size_t embed_dim, std::uint64_t seed) : lexicon_(embed_dim, seed), text_(embed_dim, embed_dim, seed) {}

	Lexicon lexicon_;
	TextEncoder text_;
};

/// Synthetic images: normalize(P·(latent(state) + latent(object) + η)) with
/// per-image seeded noise η. Latents are the name's token vector plus a
/// name-seeded visual offset.
class SyntheticBackend : public Backend {
public:
	SyntheticBackend(const corpus::Dataset &ds, std::size_t embed_dim, std::uint64_t seed);

	BackendKind kind() const override { return BackendKind::synthetic; }
	Matrix description_embeddings(const corpus::Composition &c, bool allow_templates) const override;
	bool has_descriptions(const corpus::Composition &c) const override { return corpus_.contains(c); }
	std::vector<double> encode_image(const std::string &image_key) const override;
	ImageViews image_views(const std::string &image_key, std::size_t n, std::uint64_t seed) const override;

	std::vector<double> state_latent(std::size_t s) const;
	std::vector<double> object_latent(std::size_t o) const;
	std::vector<double> image_latent(const std::string &image_key) const;

private:
	std::vector<double> encode_latent(std::span<const double> latent) const;

	corpus::Vocabulary vocab_;
	corpus::DescriptionCorpus corpus_;
	corpus::SyntheticSpec spec_;
	std::unordered_map<std::string, corpus::Composition> labels_;
};

/// Reads text_desc_<s>_<o>.mat (M×d) and img_<split>.mat (rows aligned with the
/// split's samples.csv rows) from the dataset root.
class PrecomputedBackend : public Backend {
public:
	PrecomputedBackend(const corpus::Dataset &ds, const std::filesystem::path &root, std::uint64_t seed);

	BackendKind kind() const override { return BackendKind::precomputed; }
	Matrix description_embeddings(const corpus::Composition &c, bool allow_templates) const override;
	bool has_descriptions(const corpus::Composition &c) const override;
	std::vector<double> encode_image(const std::string &image_key) const override;
	ImageViews image_views(const std::string &image_key, std::size_t n, std::uint64_t seed) const override;

private:
	std::filesystem::path root_;
	std::map<corpus::Composition, Matrix> descriptions_;
	std::unordered_map<std::string, std::vector<double>> images_;
};

/// Embedding width stored in a precomputed dataset (from img_train.mat).
std::size_t precomputed_embed_dim(const std::filesystem::path &root);

std::unique_ptr<Backend> make_backend(BackendKind kind, const corpus::Dataset &ds, const std::filesystem::path &root,
                                      std::size_t embed_dim, std::uint64_t seed);

/// Writes every description and image embedding of a backend in the
/// precomputed container layout.
void export_precomputed(const Backend &backend, const corpus::Dataset &ds, const std::filesystem::path &root);

} // namespace plid::encoder
