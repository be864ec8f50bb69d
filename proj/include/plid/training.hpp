#pragma once

#include <functional>

#include "plid/checkpoint.hpp"
#include "plid/config.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"

namespace plid::training {

struct AdamOptions {
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;
};

/// One AdamW update: p ← p·(1 − lr·wd) − lr·m̂/(√v̂ + ε). Empty gradients count as zero.
void adamw_step(ModelParams &params, const std::vector<Matrix> &grads, AdamState &state, double lr, double weight_decay,
                const AdamOptions &options = {});

struct TrainResult {
	Checkpoint best; // argmax of closed-world validation AUC, epoch 0 included
	Checkpoint last;
};

using EpochCallback = std::function<void(const EpochLog &)>;

/// Trains for cfg.epochs epochs from a seeded initialization. on_epoch also
/// receives an epoch-0 entry carrying the initial validation AUC.
TrainResult train(const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend, const EpochCallback &on_epoch = {});

/// Continues `from` (a last-state checkpoint) until cfg.epochs total epochs.
/// cfg must be shape-compatible with the checkpoint's config.
TrainResult resume(const Checkpoint &from, const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend,
                   const EpochCallback &on_epoch = {});

/// Creates the initialization checkpoint (epoch 0, with validation metrics).
Checkpoint initial_checkpoint(const corpus::Dataset &ds, const TrainConfig &cfg, const encoder::Backend &backend);

} // namespace plid::training
