#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace plid {

/// Training and model hyperparameters. Defaults follow the MIT-States column
/// of the reference hyperparameter table, except embed_dim and epochs which
/// are sized for desk-scale runs.
struct TrainConfig {
	double base_lr = 5e-5;
	double weight_decay = 2e-5;
	std::size_t epochs = 20;
	std::size_t batch_size = 64;
	double lr_decay_factor = 0.5;
	std::size_t lr_decay_every = 5;
	std::uint64_t seed = 0;
	std::size_t M = 64; // descriptions per class (first M after sorting)
	std::size_t N = 8;  // augmented views per image
	double beta_a = 1.0;
	double beta_b = 9.0;
	double tau = 0.01;
	double primitive_loss_weight = 0.1;
	double attention_dropout = 0.5;
	std::size_t embed_dim = 64;
	std::size_t dense_cov_limit = 512;
	std::size_t context_length = 8;
	bool recompute_every_step = false;
	bool use_margins = true;
	bool use_vlpd = true;
	bool use_slm = true;
	std::uint64_t encoder_seed = 7;
	std::size_t bias_grid_points = 41;

	/// Learning rate for a 0-based epoch: base_lr · factor^⌊epoch / every⌋.
	double learning_rate(std::size_t epoch) const;

	/// Throws ConfigError on any out-of-range value.
	void validate() const;

	nlohmann::json to_json() const;
	/// Strict: unknown keys and wrong types are ConfigErrors. Missing keys keep defaults.
	static TrainConfig from_json(const nlohmann::json &j);
	static TrainConfig from_json(const nlohmann::json &j, const TrainConfig &base);
	static TrainConfig load(const std::filesystem::path &path);

	/// Hex FNV-1a of the canonical JSON form.
	std::string hash() const;

	friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

/// True when two configs produce parameter tensors of the same shapes.
bool shape_compatible(const TrainConfig &a, const TrainConfig &b);

} // namespace plid
