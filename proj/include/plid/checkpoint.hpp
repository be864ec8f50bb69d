#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plid/config.hpp"
#include "plid/evaluation.hpp"
#include "plid/model.hpp"

namespace plid {

/// First and second moments per parameter tensor (ModelParams::tensors order).
struct AdamState {
	std::vector<Matrix> m;
	std::vector<Matrix> v;
	std::uint64_t step = 0;

	static AdamState zeros(const ModelParams &params);
	friend bool operator==(const AdamState &, const AdamState &) = default;
};

struct EpochLog {
	std::size_t epoch = 0; // 1-based, counts completed epochs
	double loss_y = 0.0;
	double loss_s = 0.0;
	double loss_o = 0.0;
	double loss_total = 0.0;
	double lr = 0.0;
	double val_auc = 0.0;

	friend bool operator==(const EpochLog &, const EpochLog &) = default;
};

/// Full training state after `epoch` completed epochs, plus the best
/// validation snapshot seen so far.
struct Checkpoint {
	ModelParams params;
	TrainConfig config;
	std::size_t epoch = 0;
	evaluation::MetricsReport val_metrics;
	std::string rng_state;
	AdamState adam;
	std::vector<EpochLog> log;

	ModelParams best_params;
	std::size_t best_epoch = 0;
	evaluation::MetricsReport best_val_metrics;

	std::size_t num_states() const { return params.prompt.state_table.rows(); }
	std::size_t num_objects() const { return params.prompt.object_table.rows(); }
	std::size_t embed_dim() const { return params.prompt.context.cols(); }

	friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

/// Writes manifest.json and float64 matrix containers under dir.
void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &dir);
/// Throws LoadError for missing files and ShapeError/ValidationError for
/// corrupted or inconsistent content.
Checkpoint load_checkpoint(const std::filesystem::path &dir);

/// Throws ShapeError unless the checkpoint fits the vocabulary and embedding width.
void check_compatible(const Checkpoint &ckpt, std::size_t num_states, std::size_t num_objects, std::size_t embed_dim);

/// epoch,loss_y,loss_s,loss_o,lr,val_AUC rows.
std::string log_csv(const std::vector<EpochLog> &log);

} // namespace plid
