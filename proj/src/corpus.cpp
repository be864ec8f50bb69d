#include "plid/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "plid/errors.hpp"

namespace plid::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

bool CompositionSplit::is_seen(const Composition &c) const
{
	return std::find(seen.begin(), seen.end(), c) != seen.end();
}

std::size_t DescriptionCorpus::per_class() const
{
	return texts.empty() ? 0 : texts.begin()->second.size();
}

const std::vector<std::string> &DescriptionCorpus::at(const Composition &c) const
{
	auto it = texts.find(c);
	if (it == texts.end())
		throw ValidationError("no descriptions for composition (" + std::to_string(c.state) + "," + std::to_string(c.object) + ")");
	return it->second;
}

std::string to_string(SampleSplit s)
{
	switch (s) {
	case SampleSplit::train:
		return "train";
	case SampleSplit::val:
		return "val";
	case SampleSplit::test:
		return "test";
	}
	return "?";
}

SampleSplit parse_sample_split(const std::string &s)
{
	if (s == "train")
		return SampleSplit::train;
	if (s == "val")
		return SampleSplit::val;
	if (s == "test")
		return SampleSplit::test;
	throw ValidationError("unknown sample split '" + s + "'");
}

std::vector<SampleRecord> Dataset::samples_in(SampleSplit s) const
{
	std::vector<SampleRecord> out;
	std::copy_if(samples.begin(), samples.end(), std::back_inserter(out), [s](const SampleRecord &r) { return r.split == s; });
	return out;
}

std::string composition_name(const Vocabulary &vocab, const Composition &c)
{
	return vocab.states.at(c.state) + " " + vocab.objects.at(c.object);
}

namespace {

std::string pair_str(const Composition &c)
{
	return "(" + std::to_string(c.state) + "," + std::to_string(c.object) + ")";
}

void check_unique(const std::vector<std::string> &names, const char *what)
{
	if (names.empty())
		throw ValidationError(std::string("vocabulary has no ") + what);
	std::set<std::string> seen;
	for (const auto &n : names) {
		if (n.empty())
			throw ValidationError(std::string("empty name in ") + what);
		if (!seen.insert(n).second)
			throw ValidationError(std::string("duplicate name in ") + what + ": '" + n + "'");
	}
}

void check_pairs(const Vocabulary &v, const std::vector<Composition> &pairs, const char *list)
{
	std::set<Composition> uniq;
	for (const auto &c : pairs) {
		if (c.state >= v.num_states() || c.object >= v.num_objects())
			throw ValidationError(std::string(list) + ": pair " + pair_str(c) + " out of vocabulary bounds");
		if (!uniq.insert(c).second)
			throw ValidationError(std::string(list) + ": duplicate pair " + pair_str(c));
	}
}

std::string read_text(const fs::path &p)
{
	std::ifstream is(p, std::ios::binary);
	if (!is)
		throw LoadError("missing file: " + p.string());
	std::ostringstream ss;
	ss << is.rdbuf();
	return ss.str();
}

void write_text(const fs::path &p, const std::string &text)
{
	std::ofstream os(p, std::ios::binary | std::ios::trunc);
	if (!os)
		throw LoadError("cannot write " + p.string());
	os << text;
}

json parse_json(const fs::path &p)
{
	const auto text = read_text(p);
	try {
		return json::parse(text);
	} catch (const json::exception &e) {
		throw ValidationError(p.filename().string() + ": " + e.what());
	}
}

std::vector<Composition> parse_pairs(const json &j, const char *key)
{
	if (!j.contains(key))
		throw ValidationError(std::string("splits.json: missing key '") + key + "'");
	std::vector<Composition> out;
	for (const auto &p : j.at(key)) {
		if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned())
			throw ValidationError(std::string("splits.json: malformed pair in '") + key + "'");
		out.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
	}
	return out;
}

json pairs_json(const std::vector<Composition> &pairs)
{
	json a = json::array();
	for (const auto &c : pairs)
		a.push_back({c.state, c.object});
	return a;
}

std::string description_file(const Composition &c)
{
	return std::to_string(c.state) + "_" + std::to_string(c.object) + ".txt";
}

std::vector<std::string> split_lines(const std::string &text)
{
	std::vector<std::string> lines;
	std::istringstream is(text);
	std::string line;
	while (std::getline(is, line)) {
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		if (!line.empty())
			lines.push_back(line);
	}
	return lines;
}

json synthetic_json(const SyntheticSpec &s)
{
	return json{{"num_states", s.num_states},
	            {"num_objects", s.num_objects},
	            {"seen_fraction", s.seen_fraction},
	            {"samples_per_pair", s.samples_per_pair},
	            {"descriptions_per_pair", s.descriptions_per_pair},
	            {"seed", s.seed},
	            {"latent_noise", s.latent_noise},
	            {"visual_offset", s.visual_offset}};
}

SyntheticSpec synthetic_from_json(const json &j)
{
	SyntheticSpec s;
	s.num_states = j.at("num_states").get<std::size_t>();
	s.num_objects = j.at("num_objects").get<std::size_t>();
	s.seen_fraction = j.at("seen_fraction").get<double>();
	s.samples_per_pair = j.at("samples_per_pair").get<std::size_t>();
	s.descriptions_per_pair = j.at("descriptions_per_pair").get<std::size_t>();
	s.seed = j.at("seed").get<std::uint64_t>();
	s.latent_noise = j.at("latent_noise").get<double>();
	s.visual_offset = j.at("visual_offset").get<double>();
	return s;
}

} // namespace

void validate(const Dataset &ds)
{
	const auto &v = ds.vocab;
	check_unique(v.states, "states");
	check_unique(v.objects, "objects");

	check_pairs(v, ds.split.seen, "seen");
	check_pairs(v, ds.split.unseen_val, "unseen_val");
	check_pairs(v, ds.split.unseen_test, "unseen_test");
	if (ds.split.seen.empty())
		throw ValidationError("seen split is empty");
	const std::set<Composition> seen(ds.split.seen.begin(), ds.split.seen.end());
	for (const auto *list : {&ds.split.unseen_test, &ds.split.unseen_val})
		for (const auto &c : *list)
			if (seen.count(c))
				throw ValidationError("pair " + pair_str(c) + " is both seen and unseen");

	std::vector<bool> state_covered(v.num_states()), object_covered(v.num_objects());
	for (const auto &c : ds.split.seen) {
		state_covered[c.state] = true;
		object_covered[c.object] = true;
	}
	for (std::size_t s = 0; s < v.num_states(); ++s)
		if (!state_covered[s])
			throw ValidationError("state '" + v.states[s] + "' appears in no seen pair");
	for (std::size_t o = 0; o < v.num_objects(); ++o)
		if (!object_covered[o])
			throw ValidationError("object '" + v.objects[o] + "' appears in no seen pair");

	const std::size_t m = ds.descriptions.per_class();
	for (const auto &[c, texts] : ds.descriptions.texts) {
		if (c.state >= v.num_states() || c.object >= v.num_objects())
			throw ValidationError("descriptions for out-of-range pair " + pair_str(c));
		if (texts.empty())
			throw ValidationError("no descriptions for pair " + pair_str(c));
		if (texts.size() != m)
			throw ValidationError("pair " + pair_str(c) + " has " + std::to_string(texts.size()) + " descriptions, expected " +
			                      std::to_string(m));
	}
	for (const auto *list : {&ds.split.seen, &ds.split.unseen_val, &ds.split.unseen_test})
		for (const auto &c : *list)
			if (!ds.descriptions.contains(c))
				throw ValidationError("missing descriptions for pair " + pair_str(c));

	std::set<std::string> keys;
	for (const auto &r : ds.samples) {
		if (r.image_key.empty())
			throw ValidationError("sample with empty image_key");
		if (!keys.insert(r.image_key).second)
			throw ValidationError("duplicate image_key '" + r.image_key + "'");
		if (r.state_id >= v.num_states() || r.object_id >= v.num_objects())
			throw ValidationError("sample '" + r.image_key + "' label out of vocabulary bounds");
		if (r.split == SampleSplit::train && !seen.count(r.label()))
			throw ValidationError("train sample '" + r.image_key + "' has unseen pair " + pair_str(r.label()));
	}
}

Dataset load_dataset(const fs::path &root)
{
	Dataset ds;
	const auto vocab = parse_json(root / "vocabulary.json");
	try {
		ds.vocab.states = vocab.at("states").get<std::vector<std::string>>();
		ds.vocab.objects = vocab.at("objects").get<std::vector<std::string>>();
	} catch (const json::exception &e) {
		throw ValidationError(std::string("vocabulary.json: ") + e.what());
	}

	const auto splits = parse_json(root / "splits.json");
	ds.split.seen = parse_pairs(splits, "seen");
	ds.split.unseen_val = parse_pairs(splits, "unseen_val");
	ds.split.unseen_test = parse_pairs(splits, "unseen_test");

	const auto desc_dir = root / "descriptions";
	if (!fs::is_directory(desc_dir))
		throw LoadError("missing directory: " + desc_dir.string());
	for (const auto &entry : fs::directory_iterator(desc_dir)) {
		if (!entry.is_regular_file() || entry.path().extension() != ".txt")
			continue;
		const auto stem = entry.path().stem().string();
		const auto us = stem.find('_');
		Composition c;
		try {
			if (us == std::string::npos)
				throw std::invalid_argument(stem);
			std::size_t used = 0;
			c.state = std::stoul(stem.substr(0, us), &used);
			if (used != us)
				throw std::invalid_argument(stem);
			c.object = std::stoul(stem.substr(us + 1), &used);
			if (used != stem.size() - us - 1)
				throw std::invalid_argument(stem);
		} catch (const std::exception &) {
			throw ValidationError("description file name must be <state>_<object>.txt: " + entry.path().filename().string());
		}
		auto lines = split_lines(read_text(entry.path()));
		std::sort(lines.begin(), lines.end());
		ds.descriptions.texts[c] = std::move(lines);
	}

	const auto samples_path = root / "samples.csv";
	const auto csv = read_text(samples_path);
	std::istringstream is(csv);
	std::string line;
	bool header = true;
	std::size_t line_no = 0;
	while (std::getline(is, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		if (line.empty())
			continue;
		if (header) {
			header = false;
			if (line != "image_key,state_id,object_id,split")
				throw ValidationError("samples.csv: unexpected header '" + line + "'");
			continue;
		}
		std::vector<std::string> cells;
		std::string cell;
		std::istringstream ls(line);
		while (std::getline(ls, cell, ','))
			cells.push_back(cell);
		if (cells.size() != 4)
			throw ValidationError("samples.csv line " + std::to_string(line_no) + ": expected 4 fields");
		SampleRecord r;
		r.image_key = cells[0];
		try {
			r.state_id = std::stoul(cells[1]);
			r.object_id = std::stoul(cells[2]);
		} catch (const std::exception &) {
			throw ValidationError("samples.csv line " + std::to_string(line_no) + ": non-integer label");
		}
		r.split = parse_sample_split(cells[3]);
		ds.samples.push_back(std::move(r));
	}

	if (fs::exists(root / "synthetic.json")) {
		try {
			ds.synthetic = synthetic_from_json(parse_json(root / "synthetic.json"));
		} catch (const json::exception &e) {
			throw ValidationError(std::string("synthetic.json: ") + e.what());
		}
	}

	validate(ds);
	return ds;
}

void save_dataset(const Dataset &ds, const fs::path &root)
{
	fs::create_directories(root / "descriptions");
	write_text(root / "vocabulary.json", json{{"states", ds.vocab.states}, {"objects", ds.vocab.objects}}.dump(2) + "\n");
	json splits;
	splits["seen"] = pairs_json(ds.split.seen);
	splits["unseen_val"] = pairs_json(ds.split.unseen_val);
	splits["unseen_test"] = pairs_json(ds.split.unseen_test);
	write_text(root / "splits.json", splits.dump() + "\n");

	for (const auto &entry : fs::directory_iterator(root / "descriptions"))
		if (entry.path().extension() == ".txt")
			fs::remove(entry.path());
	for (const auto &[c, texts] : ds.descriptions.texts) {
		auto sorted = texts;
		std::sort(sorted.begin(), sorted.end());
		std::string body;
		for (const auto &t : sorted)
			body += t + "\n";
		write_text(root / "descriptions" / description_file(c), body);
	}

	std::string csv = "image_key,state_id,object_id,split\n";
	for (const auto &r : ds.samples)
		csv += r.image_key + "," + std::to_string(r.state_id) + "," + std::to_string(r.object_id) + "," + to_string(r.split) + "\n";
	write_text(root / "samples.csv", csv);

	if (ds.synthetic)
		write_text(root / "synthetic.json", synthetic_json(*ds.synthetic).dump(2) + "\n");
	else if (fs::exists(root / "synthetic.json"))
		fs::remove(root / "synthetic.json");
}

std::vector<double> feasibility_scores(const Vocabulary &vocab, const CompositionSplit &split, const PrimitiveSimilarity &sim)
{
	const std::size_t ns = vocab.num_states(), no = vocab.num_objects();
	std::vector<std::vector<std::size_t>> objects_of(ns), states_of(no);
	for (const auto &c : split.seen) {
		objects_of[c.state].push_back(c.object);
		states_of[c.object].push_back(c.state);
	}
	const double lowest = -std::numeric_limits<double>::infinity();
	std::vector<double> scores(ns * no);
	for (std::size_t s = 0; s < ns; ++s)
		for (std::size_t o = 0; o < no; ++o) {
			double best_obj = lowest, best_state = lowest;
			for (auto o2 : objects_of[s])
				best_obj = std::max(best_obj, sim.object(o, o2));
			for (auto s2 : states_of[o])
				best_state = std::max(best_state, sim.state(s, s2));
			scores[s * no + o] = 0.5 * (best_obj + best_state);
		}
	return scores;
}

std::vector<Composition> feasible_compositions(const Vocabulary &vocab, const CompositionSplit &split, const PrimitiveSimilarity &sim,
                                               double threshold)
{
	const auto scores = feasibility_scores(vocab, split, sim);
	const std::set<Composition> seen(split.seen.begin(), split.seen.end());
	std::vector<Composition> out;
	for (std::size_t s = 0; s < vocab.num_states(); ++s)
		for (std::size_t o = 0; o < vocab.num_objects(); ++o) {
			const Composition c{s, o};
			if (seen.count(c) || scores[s * vocab.num_objects() + o] >= threshold)
				out.push_back(c);
		}
	return out;
}

} // namespace plid::corpus
