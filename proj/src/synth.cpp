#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "plid/corpus.hpp"
#include "plid/errors.hpp"
#include "plid/rng.hpp"

namespace plid::corpus {

namespace {

const std::vector<std::string> kStateNames = {"red", "sliced", "old", "wet", "broken", "painted", "ripe", "cooked", "dry", "frozen",
                                              "burnt", "folded", "shiny", "rusty", "torn", "wooden", "melted", "peeled", "muddy", "cracked"};
const std::vector<std::string> kObjectNames = {"tomato", "apple", "car", "shoes", "ceiling", "potato", "bread", "door", "bottle", "chair",
                                               "river", "fence", "shirt", "book", "window", "cake", "road", "lamp", "plate", "bag"};

const std::vector<std::string> kMedium = {"photo", "image", "picture"};
const std::vector<std::string> kAdverb = {"beautifully", "clearly", "neatly", "simply", "carefully"};
const std::vector<std::string> kSize = {"small", "large", "single", "lovely", "plain"};
const std::vector<std::string> kScene = {"on a table", "in a room", "near a wall", "outdoors", "in soft light", "against a dark background"};

std::string pick(Rng &rng, const std::vector<std::string> &pool)
{
	return pool[rng.index(pool.size())];
}

std::string name_for(const std::vector<std::string> &pool, const char *prefix, std::size_t i)
{
	return i < pool.size() ? pool[i] : std::string(prefix) + std::to_string(i);
}

} // namespace

std::vector<std::string> template_descriptions(const std::string &state, const std::string &object, std::size_t count, std::uint64_t seed)
{
	Rng rng(fnv1a64(state + "|" + object, seed));
	std::vector<std::string> out;
	out.reserve(count);
	for (std::size_t i = 0; i < count; ++i) {
		const auto medium = pick(rng, kMedium);
		const auto adverb = pick(rng, kAdverb);
		const auto size = pick(rng, kSize);
		const auto scene = pick(rng, kScene);
		std::string text;
		switch (rng.index(4)) {
		case 0:
			text = "The " + medium + " features a " + adverb + " arranged " + size + " " + state + " " + object + " " + scene + ".";
			break;
		case 1:
			text = "In the " + medium + ", a " + size + " " + state + " " + object + " is the central focus " + scene + ".";
			break;
		case 2:
			text = "The " + medium + " showcases a " + state + " " + object + ", " + adverb + " captured " + scene + ".";
			break;
		default:
			text = "A " + size + " " + object + " that looks " + state + " is shown " + scene + " in this " + medium + ".";
			break;
		}
		out.push_back(std::move(text));
	}
	std::sort(out.begin(), out.end());
	return out;
}

Dataset generate_synthetic(const SyntheticSpec &spec)
{
	if (spec.num_states < 2 || spec.num_objects < 2)
		throw ValidationError("synthetic dataset needs at least 2 states and 2 objects");
	if (!(spec.seen_fraction > 0.0 && spec.seen_fraction <= 1.0))
		throw ValidationError("seen_fraction must lie in (0, 1]");
	if (spec.samples_per_pair < 1 || spec.descriptions_per_pair < 1)
		throw ValidationError("samples_per_pair and descriptions_per_pair must be ≥ 1");

	const std::size_t ns = spec.num_states, no = spec.num_objects, total = ns * no;
	const auto num_seen = static_cast<std::size_t>(std::llround(spec.seen_fraction * static_cast<double>(total)));
	if (num_seen < std::max(ns, no))
		throw ValidationError("seen_fraction " + std::to_string(spec.seen_fraction) + " yields " + std::to_string(num_seen) +
		                      " seen pairs, too few to cover every state and object");

	Rng rng(spec.seed);
	Dataset ds;
	for (std::size_t s = 0; s < ns; ++s)
		ds.vocab.states.push_back(name_for(kStateNames, "state", s));
	for (std::size_t o = 0; o < no; ++o)
		ds.vocab.objects.push_back(name_for(kObjectNames, "object", o));

	std::vector<std::size_t> perm_s(ns), perm_o(no);
	std::iota(perm_s.begin(), perm_s.end(), 0);
	std::iota(perm_o.begin(), perm_o.end(), 0);
	std::shuffle(perm_s.begin(), perm_s.end(), rng.engine());
	std::shuffle(perm_o.begin(), perm_o.end(), rng.engine());

	// A diagonal walk covers every primitive with max(|S|, |O|) pairs; the rest
	// of the seen set is drawn from a shuffled remainder.
	std::set<Composition> seen;
	for (std::size_t i = 0; i < std::max(ns, no); ++i)
		seen.insert({perm_s[i % ns], perm_o[i % no]});
	std::vector<Composition> rest;
	for (std::size_t s = 0; s < ns; ++s)
		for (std::size_t o = 0; o < no; ++o)
			if (!seen.count({s, o}))
				rest.push_back({s, o});
	std::shuffle(rest.begin(), rest.end(), rng.engine());
	std::size_t cursor = 0;
	while (seen.size() < num_seen)
		seen.insert(rest[cursor++]);
	std::vector<Composition> unseen(rest.begin() + static_cast<std::ptrdiff_t>(cursor), rest.end());
	const std::size_t num_val = unseen.size() / 2;
	ds.split.seen.assign(seen.begin(), seen.end());
	ds.split.unseen_val.assign(unseen.begin(), unseen.begin() + static_cast<std::ptrdiff_t>(num_val));
	ds.split.unseen_test.assign(unseen.begin() + static_cast<std::ptrdiff_t>(num_val), unseen.end());
	std::sort(ds.split.unseen_val.begin(), ds.split.unseen_val.end());
	std::sort(ds.split.unseen_test.begin(), ds.split.unseen_test.end());
	const std::set<Composition> val_set(ds.split.unseen_val.begin(), ds.split.unseen_val.end());

	const std::uint64_t text_seed = rng.next();
	for (std::size_t s = 0; s < ns; ++s)
		for (std::size_t o = 0; o < no; ++o)
			ds.descriptions.texts[{s, o}] =
			    template_descriptions(ds.vocab.states[s], ds.vocab.objects[o], spec.descriptions_per_pair, text_seed);

	const std::size_t n = spec.samples_per_pair;
	const std::size_t n_train = static_cast<std::size_t>(std::ceil(0.6 * static_cast<double>(n)));
	const std::size_t n_val = (n - n_train) / 2;
	for (std::size_t s = 0; s < ns; ++s)
		for (std::size_t o = 0; o < no; ++o) {
			const Composition c{s, o};
			const bool is_seen = seen.count(c) != 0;
			for (std::size_t i = 0; i < n; ++i) {
				SampleRecord r;
				r.image_key = "s" + std::to_string(s) + "o" + std::to_string(o) + "_" + std::to_string(i);
				r.state_id = s;
				r.object_id = o;
				if (is_seen)
					r.split = i < n_train ? SampleSplit::train : (i < n_train + n_val ? SampleSplit::val : SampleSplit::test);
				else
					r.split = val_set.count(c) ? SampleSplit::val : SampleSplit::test;
				ds.samples.push_back(std::move(r));
			}
		}
	ds.synthetic = spec;
	validate(ds);
	return ds;
}

Dataset make_synthetic_dataset(const SyntheticSpec &spec, const std::filesystem::path &root)
{
	auto ds = generate_synthetic(spec);
	save_dataset(ds, root);
	return ds;
}

} // namespace plid::corpus
