#include "plid/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "plid/errors.hpp"
#include "plid/rng.hpp"

namespace plid {

using nlohmann::json;

double TrainConfig::learning_rate(std::size_t epoch) const
{
	return base_lr * std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
}

void TrainConfig::validate() const
{
	auto need = [](bool ok, const char *what) {
		if (!ok)
			throw ConfigError(std::string("invalid config: ") + what);
	};
	need(base_lr > 0.0 && std::isfinite(base_lr), "base_lr must be positive");
	need(weight_decay >= 0.0, "weight_decay must be non-negative");
	need(batch_size >= 1, "batch_size must be ≥ 1");
	need(lr_decay_factor > 0.0, "lr_decay_factor must be positive");
	need(lr_decay_every >= 1, "lr_decay_every must be ≥ 1");
	need(M >= 1, "M must be ≥ 1");
	need(beta_a > 0.0 && beta_b > 0.0, "beta_prior entries must be positive");
	need(tau > 0.0, "tau must be positive");
	need(primitive_loss_weight >= 0.0, "primitive_loss_weight must be non-negative");
	need(attention_dropout >= 0.0 && attention_dropout <= 1.0, "attention_dropout must lie in [0, 1]");
	need(embed_dim >= 1, "embed_dim must be ≥ 1");
	need(context_length >= 1, "context_length must be ≥ 1");
	need(bias_grid_points >= 2, "bias_grid_points must be ≥ 2");
}

json TrainConfig::to_json() const
{
	return json{{"base_lr", base_lr},
	            {"weight_decay", weight_decay},
	            {"epochs", epochs},
	            {"batch_size", batch_size},
	            {"lr_decay_factor", lr_decay_factor},
	            {"lr_decay_every", lr_decay_every},
	            {"seed", seed},
	            {"M", M},
	            {"N", N},
	            {"beta_prior", {beta_a, beta_b}},
	            {"tau", tau},
	            {"primitive_loss_weight", primitive_loss_weight},
	            {"attention_dropout", attention_dropout},
	            {"embed_dim", embed_dim},
	            {"dense_cov_limit", dense_cov_limit},
	            {"context_length", context_length},
	            {"recompute_every_step", recompute_every_step},
	            {"use_margins", use_margins},
	            {"use_vlpd", use_vlpd},
	            {"use_slm", use_slm},
	            {"encoder_seed", encoder_seed},
	            {"bias_grid_points", bias_grid_points}};
}

namespace {

template <typename T>
void read_number(const json &v, const std::string &key, T &out)
{
	if constexpr (std::is_floating_point_v<T>) {
		if (!v.is_number())
			throw ConfigError("config key '" + key + "' must be a number");
		out = v.get<T>();
	} else {
		if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
			throw ConfigError("config key '" + key + "' must be a non-negative integer");
		out = v.get<T>();
	}
}

void read_bool(const json &v, const std::string &key, bool &out)
{
	if (!v.is_boolean())
		throw ConfigError("config key '" + key + "' must be a boolean");
	out = v.get<bool>();
}

} // namespace

TrainConfig TrainConfig::from_json(const json &j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const json &j, const TrainConfig &base)
{
	if (!j.is_object())
		throw ConfigError("config must be a JSON object");
	TrainConfig c = base;
	using Setter = std::function<void(const json &, const std::string &)>;
	const std::map<std::string, Setter> setters = {
	    {"base_lr", [&](const json &v, const std::string &k) { read_number(v, k, c.base_lr); }},
	    {"weight_decay", [&](const json &v, const std::string &k) { read_number(v, k, c.weight_decay); }},
	    {"epochs", [&](const json &v, const std::string &k) { read_number(v, k, c.epochs); }},
	    {"batch_size", [&](const json &v, const std::string &k) { read_number(v, k, c.batch_size); }},
	    {"lr_decay_factor", [&](const json &v, const std::string &k) { read_number(v, k, c.lr_decay_factor); }},
	    {"lr_decay_every", [&](const json &v, const std::string &k) { read_number(v, k, c.lr_decay_every); }},
	    {"seed", [&](const json &v, const std::string &k) { read_number(v, k, c.seed); }},
	    {"M", [&](const json &v, const std::string &k) { read_number(v, k, c.M); }},
	    {"N", [&](const json &v, const std::string &k) { read_number(v, k, c.N); }},
	    {"beta_prior",
	     [&](const json &v, const std::string &k) {
		     if (!v.is_array() || v.size() != 2)
			     throw ConfigError("config key '" + k + "' must be [a, b]");
		     read_number(v[0], k, c.beta_a);
		     read_number(v[1], k, c.beta_b);
	     }},
	    {"tau", [&](const json &v, const std::string &k) { read_number(v, k, c.tau); }},
	    {"primitive_loss_weight", [&](const json &v, const std::string &k) { read_number(v, k, c.primitive_loss_weight); }},
	    {"attention_dropout", [&](const json &v, const std::string &k) { read_number(v, k, c.attention_dropout); }},
	    {"embed_dim", [&](const json &v, const std::string &k) { read_number(v, k, c.embed_dim); }},
	    {"dense_cov_limit", [&](const json &v, const std::string &k) { read_number(v, k, c.dense_cov_limit); }},
	    {"context_length", [&](const json &v, const std::string &k) { read_number(v, k, c.context_length); }},
	    {"recompute_every_step", [&](const json &v, const std::string &k) { read_bool(v, k, c.recompute_every_step); }},
	    {"use_margins", [&](const json &v, const std::string &k) { read_bool(v, k, c.use_margins); }},
	    {"use_vlpd", [&](const json &v, const std::string &k) { read_bool(v, k, c.use_vlpd); }},
	    {"use_slm", [&](const json &v, const std::string &k) { read_bool(v, k, c.use_slm); }},
	    {"encoder_seed", [&](const json &v, const std::string &k) { read_number(v, k, c.encoder_seed); }},
	    {"bias_grid_points", [&](const json &v, const std::string &k) { read_number(v, k, c.bias_grid_points); }},
	};
	for (const auto &[key, value] : j.items()) {
		auto it = setters.find(key);
		if (it == setters.end())
			throw ConfigError("unknown config key '" + key + "'");
		it->second(value, key);
	}
	c.validate();
	return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path &path)
{
	std::ifstream is(path);
	if (!is)
		throw ConfigError("cannot read config " + path.string());
	std::stringstream ss;
	ss << is.rdbuf();
	try {
		return from_json(json::parse(ss.str()));
	} catch (const json::exception &e) {
		throw ConfigError(path.string() + ": " + e.what());
	}
}

std::string TrainConfig::hash() const
{
	return hex64(fnv1a64(to_json().dump()));
}

bool shape_compatible(const TrainConfig &a, const TrainConfig &b)
{
	return a.embed_dim == b.embed_dim && a.context_length == b.context_length;
}

} // namespace plid
