#include "plid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "plid/errors.hpp"
#include "plid/rng.hpp"

namespace plid::evaluation {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();
constexpr std::size_t score_chunk = 256;

std::uint64_t eval_view_seed(const TrainConfig &cfg) { return fnv1a64("eval-views", cfg.seed); }

json bias_to_json(double b)
{
	if (b == inf)
		return "inf";
	if (b == -inf)
		return "-inf";
	return b;
}

double bias_from_json(const json &j)
{
	if (j.is_string()) {
		const auto s = j.get<std::string>();
		if (s == "inf" || s == "+inf")
			return inf;
		if (s == "-inf")
			return -inf;
		throw ValidationError("bad bias value '" + s + "'");
	}
	return j.get<double>();
}

std::string fmt(double v)
{
	if (v == inf)
		return "inf";
	if (v == -inf)
		return "-inf";
	std::ostringstream os;
	os << std::setprecision(17) << v;
	return os.str();
}

} // namespace

std::string to_string(Setting s) { return s == Setting::closed ? "closed" : "open"; }

Setting parse_setting(const std::string &s)
{
	if (s == "closed")
		return Setting::closed;
	if (s == "open")
		return Setting::open;
	throw ConfigError("unknown setting '" + s + "' (expected closed or open)");
}

json MetricsReport::to_json() const
{
	json grid = json::array();
	for (const auto &p : bias_grid)
		grid.push_back({{"bias", bias_to_json(p.bias)}, {"seen_acc", p.seen_acc}, {"unseen_acc", p.unseen_acc}});
	json j{{"setting", to_string(setting)},
	       {"best_seen", best_seen},
	       {"best_unseen", best_unseen},
	       {"best_hm", best_hm},
	       {"auc", auc},
	       {"num_candidates", num_candidates},
	       {"num_samples", num_samples},
	       {"config_hash", config_hash},
	       {"bias_grid", grid}};
	j["feasibility_threshold"] = feasibility_threshold ? bias_to_json(*feasibility_threshold) : json(nullptr);
	return j;
}

MetricsReport MetricsReport::from_json(const json &j)
{
	try {
		MetricsReport r;
		r.setting = parse_setting(j.at("setting").get<std::string>());
		r.best_seen = j.at("best_seen").get<double>();
		r.best_unseen = j.at("best_unseen").get<double>();
		r.best_hm = j.at("best_hm").get<double>();
		r.auc = j.at("auc").get<double>();
		r.num_candidates = j.at("num_candidates").get<std::size_t>();
		r.num_samples = j.at("num_samples").get<std::size_t>();
		r.config_hash = j.at("config_hash").get<std::string>();
		for (const auto &p : j.at("bias_grid"))
			r.bias_grid.push_back({bias_from_json(p.at("bias")), p.at("seen_acc").get<double>(), p.at("unseen_acc").get<double>()});
		if (j.contains("feasibility_threshold") && !j["feasibility_threshold"].is_null())
			r.feasibility_threshold = bias_from_json(j["feasibility_threshold"]);
		return r;
	} catch (const json::exception &e) {
		throw ValidationError(std::string("malformed report: ") + e.what());
	}
}

std::vector<double> bias_grid(const Matrix &logits, const std::vector<bool> &seen_mask, std::size_t grid_size)
{
	if (grid_size < 2)
		throw ValidationError("bias grid needs at least 2 points");
	double gap = 0.0;
	for (std::size_t i = 0; i < logits.rows(); ++i) {
		double ms = -inf, mu = -inf;
		for (std::size_t k = 0; k < logits.cols(); ++k) {
			double &m = seen_mask[k] ? ms : mu;
			m = std::max(m, logits(i, k));
		}
		if (std::isfinite(ms) && std::isfinite(mu))
			gap = std::max(gap, std::fabs(ms - mu));
	}
	if (!(gap > 0.0))
		gap = 1.0;
	std::vector<double> grid(grid_size);
	for (std::size_t i = 0; i < grid_size; ++i) {
		// Symmetric construction keeps the midpoint of an odd grid exactly 0.
		const double t = (2.0 * static_cast<double>(i) - static_cast<double>(grid_size - 1)) / static_cast<double>(grid_size - 1);
		grid[i] = gap * t;
	}
	grid.front() = -gap;
	grid.back() = gap;
	if (std::find(grid.begin(), grid.end(), 0.0) == grid.end())
		grid.push_back(0.0);
	std::sort(grid.begin(), grid.end());
	return grid;
}

std::pair<double, double> accuracy_at(const Matrix &logits, const Labels &labels, const std::vector<bool> &seen_mask, double bias)
{
	std::size_t n_seen = 0, n_unseen = 0, ok_seen = 0, ok_unseen = 0;
	for (std::size_t i = 0; i < logits.rows(); ++i) {
		std::int64_t best = -1;
		double best_v = -inf;
		for (std::size_t k = 0; k < logits.cols(); ++k) {
			double v = logits(i, k);
			if (!seen_mask[k]) {
				if (bias == -inf)
					continue;
				if (bias != inf)
					v += bias;
			} else if (bias == inf) {
				continue;
			}
			if (best < 0 || v > best_v) {
				best = static_cast<std::int64_t>(k);
				best_v = v;
			}
		}
		const bool is_seen = labels[i] >= 0 && seen_mask[static_cast<std::size_t>(labels[i])];
		const bool ok = best >= 0 && best == labels[i];
		if (is_seen) {
			++n_seen;
			ok_seen += ok;
		} else {
			++n_unseen;
			ok_unseen += ok;
		}
	}
	auto pct = [](std::size_t a, std::size_t n) { return n ? 100.0 * static_cast<double>(a) / static_cast<double>(n) : 0.0; };
	return {pct(ok_seen, n_seen), pct(ok_unseen, n_unseen)};
}

MetricsReport bias_sweep(const Matrix &logits, const Labels &labels, const std::vector<bool> &seen_mask, std::size_t grid_size)
{
	if (labels.size() != logits.rows() || seen_mask.size() != logits.cols())
		throw ShapeError("bias_sweep: logits, labels and seen_mask disagree in shape");
	std::size_t seen_samples = 0;
	for (auto l : labels) {
		if (l >= static_cast<std::int64_t>(logits.cols()))
			throw ValidationError("bias_sweep: label index out of range");
		seen_samples += l >= 0 && seen_mask[static_cast<std::size_t>(l)];
	}
	if (seen_samples == 0)
		throw ValidationError("bias_sweep: empty seen sample partition");
	if (seen_samples == labels.size())
		throw ValidationError("bias_sweep: empty unseen sample partition");
	const auto n_seen_cand = static_cast<std::size_t>(std::count(seen_mask.begin(), seen_mask.end(), true));
	if (n_seen_cand == 0 || n_seen_cand == seen_mask.size())
		throw ValidationError("bias_sweep: candidates must include seen and unseen classes");

	MetricsReport r;
	r.num_candidates = logits.cols();
	r.num_samples = logits.rows();
	std::vector<double> biases{-inf};
	const auto grid = bias_grid(logits, seen_mask, grid_size);
	biases.insert(biases.end(), grid.begin(), grid.end());
	biases.push_back(inf);
	for (double b : biases) {
		const auto [s, u] = accuracy_at(logits, labels, seen_mask, b);
		r.bias_grid.push_back({b, s, u});
		r.best_seen = std::max(r.best_seen, s);
		r.best_unseen = std::max(r.best_unseen, u);
		if (s + u > 0.0)
			r.best_hm = std::max(r.best_hm, 2.0 * s * u / (s + u));
	}
	for (std::size_t i = 0; i + 1 < r.bias_grid.size(); ++i) {
		const auto &a = r.bias_grid[i], &b = r.bias_grid[i + 1];
		r.auc += std::fabs(a.seen_acc - b.seen_acc) * 0.5 * (a.unseen_acc + b.unseen_acc) / 100.0;
	}
	return r;
}

ScoringSet make_scoring_set(const encoder::Backend &backend, const corpus::Dataset &ds, const std::vector<corpus::Composition> &candidates,
                            const std::vector<corpus::SampleRecord> &samples, const TrainConfig &cfg, bool allow_templates)
{
	ScoringSet set;
	set.ctx = objective::make_class_context(backend, candidates, ds.split, ds.vocab, allow_templates, cfg.M);
	set.batch = make_batch(backend, samples, cfg.N, eval_view_seed(cfg));
	for (const auto &r : samples) {
		auto it = std::find(candidates.begin(), candidates.end(), r.label());
		set.labels.push_back(it == candidates.end() ? -1 : static_cast<std::int64_t>(it - candidates.begin()));
		set.sample_seen.push_back(ds.split.is_seen(r.label()));
	}
	return set;
}

Matrix score(const ModelParams &params, const encoder::Backend &backend, const ScoringSet &set, const TrainConfig &cfg)
{
	const auto vars = ParamVars::constants(params);
	const double lambda = objective::BetaPrior{cfg.beta_a, cfg.beta_b}.mean();
	const std::size_t n = set.batch.size(), c = set.ctx.num_classes();
	Matrix out(n, c);
	for (std::size_t begin = 0; begin < n; begin += score_chunk) {
		const std::size_t end = std::min(n, begin + score_chunk);
		std::vector<std::size_t> idx(end - begin);
		std::iota(idx.begin(), idx.end(), begin);
		const auto chunk = select(set.batch, idx);
		const auto f = objective::forward(vars, chunk, set.ctx, backend.text_encoder().projection(), cfg.use_vlpd, lambda);
		const auto &h = f.h_mixed.value();
		std::copy(h.values().begin(), h.values().end(), out.data() + begin * c);
	}
	return out;
}

std::vector<corpus::Composition> closed_candidates(const corpus::CompositionSplit &split, corpus::SampleSplit which)
{
	std::vector<corpus::Composition> out = split.seen;
	const auto &extra = which == corpus::SampleSplit::val ? split.unseen_val : split.unseen_test;
	out.insert(out.end(), extra.begin(), extra.end());
	std::sort(out.begin(), out.end());
	return out;
}

std::vector<corpus::Composition> all_compositions(const corpus::Vocabulary &vocab)
{
	std::vector<corpus::Composition> out;
	for (std::size_t s = 0; s < vocab.num_states(); ++s)
		for (std::size_t o = 0; o < vocab.num_objects(); ++o)
			out.push_back({s, o});
	return out;
}

corpus::PrimitiveSimilarity name_similarity(const encoder::Backend &backend, const corpus::Vocabulary &vocab)
{
	auto encode_all = [&](const std::vector<std::string> &names) {
		std::vector<std::vector<double>> out;
		for (const auto &n : names)
			out.push_back(backend.encode_sentence(n));
		return out;
	};
	auto states = std::make_shared<std::vector<std::vector<double>>>(encode_all(vocab.states));
	auto objects = std::make_shared<std::vector<std::vector<double>>>(encode_all(vocab.objects));
	return {[states](std::size_t a, std::size_t b) { return cosine((*states)[a], (*states)[b]); },
	        [objects](std::size_t a, std::size_t b) { return cosine((*objects)[a], (*objects)[b]); }};
}

MetricsReport validation_metrics(const ModelParams &params, const encoder::Backend &backend, const ScoringSet &val, const TrainConfig &cfg)
{
	auto r = bias_sweep(score(params, backend, val, cfg), val.labels, val.ctx.seen, cfg.bias_grid_points);
	r.config_hash = cfg.hash();
	return r;
}

MetricsReport evaluate_closed(const ModelParams &params, const corpus::Dataset &ds, const encoder::Backend &backend, const TrainConfig &cfg)
{
	const auto set = make_scoring_set(backend, ds, closed_candidates(ds.split, corpus::SampleSplit::test),
	                                  ds.samples_in(corpus::SampleSplit::test), cfg, false);
	auto r = bias_sweep(score(params, backend, set, cfg), set.labels, set.ctx.seen, cfg.bias_grid_points);
	r.setting = Setting::closed;
	r.config_hash = cfg.hash();
	return r;
}

namespace {

/// Columns of a full S×O scoring pass restricted to the pairs kept at a threshold.
MetricsReport sweep_feasible(const Matrix &full, const ScoringSet &set, const std::vector<double> &scores, double threshold,
                             std::size_t grid_size)
{
	std::vector<std::size_t> cols;
	for (std::size_t k = 0; k < set.ctx.num_classes(); ++k)
		if (set.ctx.seen[k] || scores[k] >= threshold)
			cols.push_back(k);
	std::vector<std::int64_t> remap(set.ctx.num_classes(), -1);
	for (std::size_t i = 0; i < cols.size(); ++i)
		remap[cols[i]] = static_cast<std::int64_t>(i);
	Matrix logits(full.rows(), cols.size());
	for (std::size_t i = 0; i < full.rows(); ++i)
		for (std::size_t j = 0; j < cols.size(); ++j)
			logits(i, j) = full(i, cols[j]);
	Labels labels;
	for (auto l : set.labels)
		labels.push_back(l < 0 ? -1 : remap[static_cast<std::size_t>(l)]);
	std::vector<bool> seen;
	for (auto k : cols)
		seen.push_back(set.ctx.seen[k]);
	auto r = bias_sweep(logits, labels, seen, grid_size);
	r.setting = Setting::open;
	r.feasibility_threshold = threshold;
	return r;
}

} // namespace

MetricsReport evaluate_open(const ModelParams &params, const corpus::Dataset &ds, const encoder::Backend &backend, const TrainConfig &cfg)
{
	const auto candidates = all_compositions(ds.vocab);
	const auto scores = corpus::feasibility_scores(ds.vocab, ds.split, name_similarity(backend, ds.vocab));

	const auto val = make_scoring_set(backend, ds, candidates, ds.samples_in(corpus::SampleSplit::val), cfg, true);
	const auto val_logits = score(params, backend, val, cfg);
	std::vector<double> thresholds{-inf};
	for (std::size_t k = 0; k < candidates.size(); ++k)
		if (!val.ctx.seen[k])
			thresholds.push_back(scores[k]);
	std::sort(thresholds.begin(), thresholds.end());
	thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
	double best_threshold = -inf, best_hm = -1.0;
	for (double t : thresholds) {
		// The highest threshold may drop every unseen candidate.
		MetricsReport r;
		try {
			r = sweep_feasible(val_logits, val, scores, t, cfg.bias_grid_points);
		} catch (const ValidationError &) {
			continue;
		}
		if (r.best_hm > best_hm) {
			best_hm = r.best_hm;
			best_threshold = t;
		}
	}

	const auto test = make_scoring_set(backend, ds, candidates, ds.samples_in(corpus::SampleSplit::test), cfg, true);
	auto r = sweep_feasible(score(params, backend, test, cfg), test, scores, best_threshold, cfg.bias_grid_points);
	r.config_hash = cfg.hash();
	return r;
}

std::pair<MetricsReport, MetricsReport> evaluate(const ModelParams &params, const corpus::Dataset &ds, const encoder::Backend &backend,
                                                 const TrainConfig &cfg)
{
	return {evaluate_closed(params, ds, backend, cfg), evaluate_open(params, ds, backend, cfg)};
}

std::string curve_csv(const MetricsReport &report)
{
	std::ostringstream os;
	os << "bias,seen_acc,unseen_acc\n";
	for (const auto &p : report.bias_grid)
		os << fmt(p.bias) << ',' << fmt(p.seen_acc) << ',' << fmt(p.unseen_acc) << '\n';
	return os.str();
}

std::string curve_svg(const MetricsReport &report)
{
	constexpr double size = 400.0, pad = 50.0;
	auto x = [&](double seen) { return pad + seen / 100.0 * size; };
	auto y = [&](double unseen) { return pad + size - unseen / 100.0 * size; };
	std::ostringstream os;
	os << std::fixed << std::setprecision(2);
	os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << size + 2 * pad << "\">\n";
	os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
	os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << size << "\" height=\"" << size
	   << "\" fill=\"none\" stroke=\"black\"/>\n";
	for (int t = 0; t <= 100; t += 20) {
		os << "<text x=\"" << x(t) << "\" y=\"" << pad + size + 18 << "\" font-size=\"11\" text-anchor=\"middle\">" << t << "</text>\n";
		os << "<text x=\"" << pad - 8 << "\" y=\"" << y(t) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << t << "</text>\n";
	}
	os << "<text x=\"" << pad + size / 2 << "\" y=\"" << pad + size + 38 << "\" font-size=\"13\" text-anchor=\"middle\">seen accuracy (%)</text>\n";
	os << "<text x=\"14\" y=\"" << pad + size / 2 << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
	   << pad + size / 2 << ")\">unseen accuracy (%)</text>\n";
	os << "<text x=\"" << pad + size / 2 << "\" y=\"" << pad - 18 << "\" font-size=\"14\" text-anchor=\"middle\">" << to_string(report.setting)
	   << " world: AUC " << report.auc << ", best HM " << report.best_hm << "</text>\n";
	os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
	for (const auto &p : report.bias_grid)
		os << x(p.seen_acc) << ',' << y(p.unseen_acc) << ' ';
	os << "\"/>\n</svg>\n";
	return os.str();
}

void write_report(const MetricsReport &report, const fs::path &dir)
{
	fs::create_directories(dir);
	auto put = [&](const fs::path &p, const std::string &text) {
		std::ofstream os(p, std::ios::binary);
		if (!os)
			throw Error("cannot write " + p.string());
		os << text;
	};
	put(dir / "report.json", report.to_json().dump(2) + "\n");
	put(dir / "curve.csv", curve_csv(report));
	put(dir / "curve.svg", curve_svg(report));
}

MetricsReport read_report(const fs::path &path)
{
	std::ifstream is(path);
	if (!is)
		throw LoadError("missing file: " + path.string());
	try {
		return MetricsReport::from_json(json::parse(is));
	} catch (const json::exception &e) {
		throw ValidationError(path.string() + ": " + e.what());
	}
}

std::string metrics_table(const std::vector<MetricsReport> &reports)
{
	std::ostringstream os;
	os << std::left << std::setw(8) << "setting" << std::right << std::setw(10) << "seen" << std::setw(10) << "unseen" << std::setw(10) << "HM"
	   << std::setw(10) << "AUC" << std::setw(12) << "candidates" << '\n';
	os << std::fixed << std::setprecision(2);
	for (const auto &r : reports)
		os << std::left << std::setw(8) << to_string(r.setting) << std::right << std::setw(10) << r.best_seen << std::setw(10) << r.best_unseen
		   << std::setw(10) << r.best_hm << std::setw(10) << r.auc << std::setw(12) << r.num_candidates << '\n';
	return os.str();
}

} // namespace plid::evaluation
