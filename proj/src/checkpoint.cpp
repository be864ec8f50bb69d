#include "plid/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "plid/errors.hpp"
#include "plid/mat_io.hpp"
#include "plid/rng.hpp"

namespace plid {

using nlohmann::json;
namespace fs = std::filesystem;

AdamState AdamState::zeros(const ModelParams &params)
{
	AdamState s;
	for (const auto *t : params.tensors()) {
		s.m.emplace_back(t->rows(), t->cols());
		s.v.emplace_back(t->rows(), t->cols());
	}
	return s;
}

namespace {

constexpr const char *format_tag = "plid-checkpoint-1";

/// Expected (rows, cols) per tensor in ModelParams::tensors order.
std::vector<std::pair<std::size_t, std::size_t>> expected_shapes(std::size_t L, std::size_t S, std::size_t O, std::size_t d)
{
	std::vector<std::pair<std::size_t, std::size_t>> out{{L, d}, {S, d}, {O, d}};
	for (int i = 0; i < 8; ++i)
		out.emplace_back(d, d);
	for (int i = 0; i < 2; ++i) {
		out.emplace_back(d, d);
		out.emplace_back(1, d);
		out.emplace_back(d, d);
		out.emplace_back(1, d);
	}
	return out;
}

void write_tensors(const std::vector<const Matrix *> &tensors, const fs::path &dir)
{
	fs::create_directories(dir);
	const auto names = ModelParams::names();
	for (std::size_t i = 0; i < tensors.size(); ++i)
		mat_io::write(dir / (names[i] + ".mat"), *tensors[i], mat_io::Precision::f64);
}

std::vector<const Matrix *> pointers(const std::vector<Matrix> &v)
{
	std::vector<const Matrix *> out;
	for (const auto &m : v)
		out.push_back(&m);
	return out;
}

std::vector<Matrix> read_tensors(const fs::path &dir, const std::vector<std::pair<std::size_t, std::size_t>> &shapes)
{
	const auto names = ModelParams::names();
	std::vector<Matrix> out;
	for (std::size_t i = 0; i < names.size(); ++i) {
		const auto path = dir / (names[i] + ".mat");
		if (!fs::exists(path))
			throw LoadError("missing file: " + path.string());
		auto m = mat_io::read(path);
		if (m.rows() != shapes[i].first || m.cols() != shapes[i].second)
			throw ShapeError(path.string() + ": expected " + std::to_string(shapes[i].first) + "×" + std::to_string(shapes[i].second) + ", found " +
			                 std::to_string(m.rows()) + "×" + std::to_string(m.cols()));
		for (double x : m.values())
			if (!std::isfinite(x))
				throw ValidationError(path.string() + ": non-finite entry");
		out.push_back(std::move(m));
	}
	return out;
}

ModelParams params_from(std::vector<Matrix> tensors)
{
	ModelParams p;
	auto slots = p.tensors();
	for (std::size_t i = 0; i < slots.size(); ++i)
		*slots[i] = std::move(tensors[i]);
	return p;
}

json log_to_json(const std::vector<EpochLog> &log)
{
	json out = json::array();
	for (const auto &e : log)
		out.push_back({{"epoch", e.epoch},
		               {"loss_y", e.loss_y},
		               {"loss_s", e.loss_s},
		               {"loss_o", e.loss_o},
		               {"loss_total", e.loss_total},
		               {"lr", e.lr},
		               {"val_auc", e.val_auc}});
	return out;
}

std::vector<EpochLog> log_from_json(const json &j)
{
	std::vector<EpochLog> out;
	for (const auto &e : j)
		out.push_back({e.at("epoch").get<std::size_t>(), e.at("loss_y").get<double>(), e.at("loss_s").get<double>(),
		               e.at("loss_o").get<double>(), e.at("loss_total").get<double>(), e.at("lr").get<double>(),
		               e.at("val_auc").get<double>()});
	return out;
}

} // namespace

void save_checkpoint(const Checkpoint &ckpt, const fs::path &dir)
{
	fs::create_directories(dir);
	write_tensors(ckpt.params.tensors(), dir / "params");
	write_tensors(ckpt.best_params.tensors(), dir / "best_params");
	write_tensors(pointers(ckpt.adam.m), dir / "adam_m");
	write_tensors(pointers(ckpt.adam.v), dir / "adam_v");
	json manifest{{"format", format_tag},
	              {"epoch", ckpt.epoch},
	              {"num_states", ckpt.num_states()},
	              {"num_objects", ckpt.num_objects()},
	              {"embed_dim", ckpt.embed_dim()},
	              {"context_length", ckpt.params.prompt.context.rows()},
	              {"config", ckpt.config.to_json()},
	              {"config_hash", ckpt.config.hash()},
	              {"val_metrics", ckpt.val_metrics.to_json()},
	              {"rng_state", ckpt.rng_state},
	              {"adam_step", ckpt.adam.step},
	              {"log", log_to_json(ckpt.log)},
	              {"best_epoch", ckpt.best_epoch},
	              {"best_val_metrics", ckpt.best_val_metrics.to_json()},
	              {"tensors", ModelParams::names()}};
	std::ofstream os(dir / "manifest.json", std::ios::binary);
	if (!os)
		throw Error("cannot write " + (dir / "manifest.json").string());
	os << manifest.dump(2) << '\n';
	if (!os)
		throw Error("failed writing " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const fs::path &dir)
{
	const auto manifest_path = dir / "manifest.json";
	std::ifstream is(manifest_path);
	if (!is)
		throw LoadError("missing file: " + manifest_path.string());
	json j;
	try {
		j = json::parse(is);
	} catch (const json::exception &e) {
		throw ValidationError(manifest_path.string() + ": " + e.what());
	}
	try {
		if (j.at("format").get<std::string>() != format_tag)
			throw ValidationError(manifest_path.string() + ": unsupported checkpoint format");
		if (j.at("tensors").get<std::vector<std::string>>() != ModelParams::names())
			throw ValidationError(manifest_path.string() + ": tensor list does not match this build");
		Checkpoint c;
		c.config = TrainConfig::from_json(j.at("config"));
		if (c.config.hash() != j.at("config_hash").get<std::string>())
			throw ValidationError(manifest_path.string() + ": config hash mismatch");
		const auto shapes = expected_shapes(j.at("context_length").get<std::size_t>(), j.at("num_states").get<std::size_t>(),
		                                    j.at("num_objects").get<std::size_t>(), j.at("embed_dim").get<std::size_t>());
		if (shapes.front().first != c.config.context_length || shapes.front().second != c.config.embed_dim)
			throw ShapeError(manifest_path.string() + ": context shape disagrees with the config");
		c.params = params_from(read_tensors(dir / "params", shapes));
		c.best_params = params_from(read_tensors(dir / "best_params", shapes));
		c.adam.m = read_tensors(dir / "adam_m", shapes);
		c.adam.v = read_tensors(dir / "adam_v", shapes);
		c.adam.step = j.at("adam_step").get<std::uint64_t>();
		c.epoch = j.at("epoch").get<std::size_t>();
		c.val_metrics = evaluation::MetricsReport::from_json(j.at("val_metrics"));
		c.rng_state = j.at("rng_state").get<std::string>();
		Rng probe;
		probe.set_state(c.rng_state);
		c.log = log_from_json(j.at("log"));
		c.best_epoch = j.at("best_epoch").get<std::size_t>();
		c.best_val_metrics = evaluation::MetricsReport::from_json(j.at("best_val_metrics"));
		if (c.log.size() > c.epoch || c.best_epoch > c.epoch)
			throw ValidationError(manifest_path.string() + ": epoch counters are inconsistent");
		return c;
	} catch (const json::exception &e) {
		throw ValidationError(manifest_path.string() + ": " + e.what());
	}
}

void check_compatible(const Checkpoint &ckpt, std::size_t num_states, std::size_t num_objects, std::size_t embed_dim)
{
	if (ckpt.num_states() != num_states || ckpt.num_objects() != num_objects || ckpt.embed_dim() != embed_dim)
		throw ShapeError("checkpoint has " + std::to_string(ckpt.num_states()) + " states, " + std::to_string(ckpt.num_objects()) +
		                 " objects, width " + std::to_string(ckpt.embed_dim()) + "; dataset/backend need " + std::to_string(num_states) +
		                 ", " + std::to_string(num_objects) + ", " + std::to_string(embed_dim));
}

std::string log_csv(const std::vector<EpochLog> &log)
{
	std::ostringstream os;
	os << "epoch,loss_y,loss_s,loss_o,lr,val_AUC\n" << std::setprecision(17);
	for (const auto &e : log)
		os << e.epoch << ',' << e.loss_y << ',' << e.loss_s << ',' << e.loss_o << ',' << e.lr << ',' << e.val_auc << '\n';
	return os.str();
}

} // namespace plid
