#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace plid::corpus {

struct Vocabulary {
	std::vector<std::string> states;
	std::vector<std::string> objects;

	std::size_t num_states() const { return states.size(); }
	std::size_t num_objects() const { return objects.size(); }

	friend bool operator==(const Vocabulary &, const Vocabulary &) = default;
};

/// A (state, object) class label.
struct Composition {
	std::size_t state = 0;
	std::size_t object = 0;

	friend auto operator<=>(const Composition &, const Composition &) = default;
};

struct CompositionSplit {
	std::vector<Composition> seen;
	std::vector<Composition> unseen_val;
	std::vector<Composition> unseen_test;

	bool is_seen(const Composition &c) const;
	friend bool operator==(const CompositionSplit &, const CompositionSplit &) = default;
};

/// Class descriptions, each list sorted lexicographically (the sort order fixes
/// the index pairing used by cross-class covariance).
struct DescriptionCorpus {
	std::map<Composition, std::vector<std::string>> texts;

	/// Descriptions per class (M); 0 when empty.
	std::size_t per_class() const;
	bool contains(const Composition &c) const { return texts.count(c) != 0; }
	const std::vector<std::string> &at(const Composition &c) const;

	friend bool operator==(const DescriptionCorpus &, const DescriptionCorpus &) = default;
};

enum class SampleSplit { train, val, test };

std::string to_string(SampleSplit s);
SampleSplit parse_sample_split(const std::string &s);

struct SampleRecord {
	std::string image_key;
	std::size_t state_id = 0;
	std::size_t object_id = 0;
	SampleSplit split = SampleSplit::train;

	Composition label() const { return {state_id, object_id}; }
	friend bool operator==(const SampleRecord &, const SampleRecord &) = default;
};

struct SyntheticSpec {
	std::size_t num_states = 5;
	std::size_t num_objects = 6;
	double seen_fraction = 0.6;
	std::size_t samples_per_pair = 20;
	std::size_t descriptions_per_pair = 16;
	std::uint64_t seed = 7;
	/// Scale of the per-image latent noise; each entry has std latent_noise/√d.
	double latent_noise = 3.0;
	/// Weight of the name-independent visual component of each primitive latent.
	double visual_offset = 1.5;

	friend bool operator==(const SyntheticSpec &, const SyntheticSpec &) = default;
};

struct Dataset {
	Vocabulary vocab;
	CompositionSplit split;
	DescriptionCorpus descriptions;
	std::vector<SampleRecord> samples;
	/// Present for generated datasets; drives the synthetic image backend.
	std::optional<SyntheticSpec> synthetic;

	std::vector<SampleRecord> samples_in(SampleSplit s) const;
	friend bool operator==(const Dataset &, const Dataset &) = default;
};

/// Checks every invariant; throws ValidationError naming the offending entry.
void validate(const Dataset &ds);

Dataset load_dataset(const std::filesystem::path &root);
void save_dataset(const Dataset &ds, const std::filesystem::path &root);

/// In-memory generation; deterministic for a given spec.
Dataset generate_synthetic(const SyntheticSpec &spec);
/// Generates, writes to root and returns the dataset.
Dataset make_synthetic_dataset(const SyntheticSpec &spec, const std::filesystem::path &root);

/// Template description of the kind used for synthetic corpora and for
/// open-world candidates that lack descriptions.
std::vector<std::string> template_descriptions(const std::string &state, const std::string &object, std::size_t count, std::uint64_t seed);

/// Similarity between two states or two objects.
struct PrimitiveSimilarity {
	std::function<double(std::size_t, std::size_t)> state;
	std::function<double(std::size_t, std::size_t)> object;
};

/// ½·[max_{o' ∈ objs(s)} sim(o, o') + max_{s' ∈ states(o)} sim(s, s')] over seen
/// co-occurrences, for every pair of S×O in state-major order.
std::vector<double> feasibility_scores(const Vocabulary &vocab, const CompositionSplit &split, const PrimitiveSimilarity &sim);

/// Pairs of S×O (state-major order) whose score is ≥ threshold, plus every seen pair.
std::vector<Composition> feasible_compositions(const Vocabulary &vocab, const CompositionSplit &split, const PrimitiveSimilarity &sim,
                                               double threshold);

std::string composition_name(const Vocabulary &vocab, const Composition &c);

} // namespace plid::corpus
