// plid: dataset synthesis, training, evaluation, gradient checks and reports.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "plid/checkpoint.hpp"
#include "plid/config.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/errors.hpp"
#include "plid/evaluation.hpp"
#include "plid/gradcheck.hpp"
#include "plid/kernels.hpp"
#include "plid/run_manifest.hpp"
#include "plid/training.hpp"

namespace fs = std::filesystem;
using namespace plid;

namespace {

struct CommonFlags {
	std::string config;
	std::string data;
	std::string out;
	std::optional<std::uint64_t> seed;
	std::string backend = "synthetic";
};

TrainConfig resolve_config(const CommonFlags &f)
{
	TrainConfig cfg = f.config.empty() ? TrainConfig{} : TrainConfig::load(f.config);
	if (f.seed)
		cfg.seed = *f.seed;
	cfg.validate();
	return cfg;
}

std::unique_ptr<encoder::Backend> open_backend(const CommonFlags &f, const corpus::Dataset &ds, const TrainConfig &cfg)
{
	const auto kind = encoder::parse_backend(f.backend);
	if (kind == encoder::BackendKind::synthetic && !ds.synthetic)
		throw ConfigError("dataset " + f.data + " has no synthetic.json; use --backend precomputed");
	return encoder::make_backend(kind, ds, f.data, cfg.embed_dim, cfg.encoder_seed);
}

void write_text(const fs::path &p, const std::string &text)
{
	std::ofstream os(p, std::ios::binary);
	if (!os)
		throw Error("cannot write " + p.string());
	os << text;
}

RunManifest start_manifest(const std::string &command, const CommonFlags &f, const TrainConfig &cfg)
{
	RunManifest m;
	m.command = command;
	m.config_path = f.config;
	m.config = cfg.to_json();
	m.seed = cfg.seed;
	m.started_at = utc_timestamp();
	std::string inputs = f.data.empty() ? "" : hash_tree(f.data);
	if (!f.config.empty())
		inputs += hash_tree(f.config);
	m.input_hash = hex64(fnv1a64(inputs + cfg.to_json().dump()));
	return m;
}

void finish_manifest(RunManifest m, const fs::path &dir, std::vector<std::string> artifacts)
{
	m.artifacts = std::move(artifacts);
	m.finished_at = utc_timestamp();
	write_run_manifest(m, dir);
}

int cmd_synth(const corpus::SyntheticSpec &spec, const std::string &out, std::size_t export_dim)
{
	RunManifest manifest;
	manifest.command = "synth";
	manifest.seed = spec.seed;
	manifest.started_at = utc_timestamp();
	const auto ds = corpus::make_synthetic_dataset(spec, out);
	{
		std::ifstream is(fs::path(out) / "synthetic.json");
		manifest.config = nlohmann::json::parse(is);
	}
	manifest.input_hash = hex64(fnv1a64(manifest.config.dump()));
	std::cout << ds.split.seen.size() << " seen / " << ds.split.unseen_val.size() + ds.split.unseen_test.size() << " unseen ("
	          << ds.split.unseen_val.size() << " val, " << ds.split.unseen_test.size() << " test) compositions, " << ds.samples.size()
	          << " samples, " << ds.descriptions.per_class() << " descriptions per pair\n";
	if (export_dim > 0) {
		encoder::SyntheticBackend backend(ds, export_dim, TrainConfig{}.encoder_seed);
		encoder::export_precomputed(backend, ds, out);
		std::cout << "exported precomputed embeddings (width " << export_dim << ")\n";
	}
	std::vector<std::string> artifacts;
	for (const auto &e : fs::directory_iterator(out))
		if (e.path().filename() != run_manifest_name)
			artifacts.push_back(e.path().filename().string());
	std::sort(artifacts.begin(), artifacts.end());
	finish_manifest(manifest, out, std::move(artifacts));
	return 0;
}

int cmd_train(const CommonFlags &f, const std::string &resume_from)
{
	const auto cfg = resolve_config(f);
	auto manifest = start_manifest("train", f, cfg);
	const auto ds = corpus::load_dataset(f.data);
	const auto backend = open_backend(f, ds, cfg);
	std::cerr << "kernels: " << kernels::isa_name(kernels::active_isa()) << "\n";
	auto progress = [](const EpochLog &e) {
		std::cerr << "epoch " << e.epoch << "  loss " << e.loss_total << " (y " << e.loss_y << ", s " << e.loss_s << ", o " << e.loss_o
		          << ")  lr " << e.lr << "  val AUC " << e.val_auc << "\n";
	};
	const auto result = resume_from.empty() ? training::train(ds, cfg, *backend, progress)
	                                        : training::resume(load_checkpoint(resume_from), ds, cfg, *backend, progress);
	const fs::path out = f.out;
	fs::create_directories(out);
	save_checkpoint(result.best, out / "best");
	save_checkpoint(result.last, out / "last");
	write_text(out / "train_log.csv", log_csv(result.last.log));
	std::cout << "best epoch " << result.best.epoch << " val AUC " << result.best.val_metrics.auc << " (HM " << result.best.val_metrics.best_hm
	          << ")\n";
	finish_manifest(manifest, out, {"best", "last", "train_log.csv"});
	return 0;
}

int cmd_eval(const CommonFlags &f, const std::string &ckpt_dir, const std::string &setting_name)
{
	const auto setting = evaluation::parse_setting(setting_name);
	const auto ckpt = load_checkpoint(ckpt_dir);
	auto cfg = ckpt.config;
	if (f.seed)
		cfg.seed = *f.seed;
	auto manifest = start_manifest("eval", f, cfg);
	const auto ds = corpus::load_dataset(f.data);
	const auto backend = open_backend(f, ds, cfg);
	check_compatible(ckpt, ds.vocab.num_states(), ds.vocab.num_objects(), backend->embed_dim());
	const auto report = setting == evaluation::Setting::closed ? evaluation::evaluate_closed(ckpt.params, ds, *backend, cfg)
	                                                           : evaluation::evaluate_open(ckpt.params, ds, *backend, cfg);
	const fs::path out = f.out.empty() ? fs::path(ckpt_dir) / ("eval_" + setting_name) : fs::path(f.out);
	evaluation::write_report(report, out);
	std::cout << evaluation::metrics_table({report});
	finish_manifest(manifest, out, {"report.json", "curve.csv", "curve.svg"});
	return 0;
}

int cmd_gradcheck(const CommonFlags &f, const GradcheckOptions &opts, bool verbose)
{
	auto cfg = resolve_config(f);
	cfg.recompute_every_step = true;
	const auto ds = corpus::load_dataset(f.data);
	const auto backend = open_backend(f, ds, cfg);
	const auto report = gradcheck(ds, *backend, cfg, opts);
	if (verbose) {
		auto entries = report.entries;
		std::sort(entries.begin(), entries.end(), [](const auto &a, const auto &b) { return a.rel_error > b.rel_error; });
		for (std::size_t i = 0; i < std::min<std::size_t>(10, entries.size()); ++i)
			std::cout << entries[i].tensor << "[" << entries[i].index << "] analytic " << entries[i].analytic << " numeric " << entries[i].numeric
			          << " rel " << entries[i].rel_error << "\n";
	}
	std::cout << "checked " << report.entries.size() << " entries, max relative error " << report.max_rel_error << " at " << report.worst
	          << "\n";
	if (!report.passed()) {
		std::cout << "FAILED: relative error ≥ 1e-4\n";
		return 1;
	}
	std::cout << "OK\n";
	return 0;
}

int cmd_report(const std::vector<std::string> &inputs, const std::string &out)
{
	std::vector<evaluation::MetricsReport> reports;
	for (const auto &in : inputs) {
		const fs::path p = fs::is_directory(in) ? fs::path(in) / "report.json" : fs::path(in);
		reports.push_back(evaluation::read_report(p));
		const fs::path dir = out.empty() ? p.parent_path() : fs::path(out) / p.parent_path().filename();
		fs::create_directories(dir);
		write_text(dir / "curve.svg", evaluation::curve_svg(reports.back()));
		write_text(dir / "curve.csv", evaluation::curve_csv(reports.back()));
	}
	const auto table = evaluation::metrics_table(reports);
	std::cout << table;
	if (!out.empty()) {
		RunManifest m;
		m.command = "report";
		m.started_at = utc_timestamp();
		std::string hashes;
		for (const auto &in : inputs)
			hashes += hash_tree(in);
		m.input_hash = hex64(fnv1a64(hashes));
		write_text(fs::path(out) / "metrics.txt", table);
		finish_manifest(m, out, {"metrics.txt"});
	}
	return 0;
}

} // namespace

int main(int argc, char **argv)
{
	CLI::App app{"Compositional zero-shot learning with language-informed prompt distributions"};
	app.require_subcommand(1);
	CommonFlags flags;

	auto add_common = [&](CLI::App *cmd, bool need_data) {
		cmd->add_option("--config", flags.config, "JSON config (unknown keys are rejected)")->check(CLI::ExistingFile);
		auto *data = cmd->add_option("--data", flags.data, "dataset directory")->check(CLI::ExistingDirectory);
		if (need_data)
			data->required();
		cmd->add_option("--seed", flags.seed, "overrides the config seed");
		cmd->add_option("--backend", flags.backend, "encoder backend")->check(CLI::IsMember({"synthetic", "precomputed"}));
	};

	corpus::SyntheticSpec spec;
	std::string synth_out;
	std::size_t export_dim = 0;
	auto *synth = app.add_subcommand("synth", "generate a synthetic dataset");
	synth->add_option("--states", spec.num_states, "number of states")->check(CLI::Range(1, 64));
	synth->add_option("--objects", spec.num_objects, "number of objects")->check(CLI::Range(1, 64));
	synth->add_option("--seen-frac", spec.seen_fraction, "fraction of pairs that are seen")->check(CLI::Range(0.0, 1.0));
	synth->add_option("--samples-per-pair", spec.samples_per_pair, "images per composition")->check(CLI::PositiveNumber);
	synth->add_option("--descriptions", spec.descriptions_per_pair, "descriptions per composition")->check(CLI::PositiveNumber);
	synth->add_option("--latent-noise", spec.latent_noise, "per-image latent noise")->check(CLI::NonNegativeNumber);
	synth->add_option("--visual-offset", spec.visual_offset, "weight of the visual latent component")->check(CLI::NonNegativeNumber);
	synth->add_option("--seed", spec.seed, "generator seed");
	synth->add_option("--out", synth_out, "output directory")->required();
	synth->add_option("--export-precomputed", export_dim, "also write precomputed embeddings of this width");

	std::string resume_from;
	auto *train = app.add_subcommand("train", "train and save best/last checkpoints");
	add_common(train, true);
	train->add_option("--out", flags.out, "run directory")->required();
	train->add_option("--resume", resume_from, "continue from a last/ checkpoint")->check(CLI::ExistingDirectory);

	std::string ckpt, setting = "closed";
	auto *eval = app.add_subcommand("eval", "evaluate a checkpoint");
	add_common(eval, true);
	eval->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
	eval->add_option("--setting", setting, "closed or open world")->check(CLI::IsMember({"closed", "open"}));
	eval->add_option("--out", flags.out, "report directory (default <ckpt>/eval_<setting>)");

	GradcheckOptions gc;
	auto *grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
	add_common(grad, true);
	grad->add_option("--samples", gc.samples, "batch size")->check(CLI::PositiveNumber);
	bool gc_verbose = false;
	grad->add_flag("--verbose", gc_verbose, "print the worst entries");
	grad->add_option("--step", gc.step, "finite-difference step")->check(CLI::PositiveNumber);
	grad->add_option("--entries", gc.entries_per_tensor, "entries per tensor (0 = all)");

	std::vector<std::string> report_inputs;
	std::string report_out;
	auto *report = app.add_subcommand("report", "render metric tables and bias-sweep plots");
	report->add_option("inputs", report_inputs, "report.json files or directories")->required()->check(CLI::ExistingPath);
	report->add_option("--out", report_out, "output directory (default: next to each report)");

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp &e) {
		return app.exit(e);
	} catch (const CLI::CallForAllHelp &e) {
		return app.exit(e);
	} catch (const CLI::ParseError &e) {
		app.exit(e);
		return 2;
	}

	try {
		if (*synth)
			return cmd_synth(spec, synth_out, export_dim);
		if (*train)
			return cmd_train(flags, resume_from);
		if (*eval)
			return cmd_eval(flags, ckpt, setting);
		if (*grad)
			return cmd_gradcheck(flags, gc, gc_verbose);
		if (*report)
			return cmd_report(report_inputs, report_out);
	} catch (const ConfigError &e) {
		std::cerr << "config error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 2;
}
