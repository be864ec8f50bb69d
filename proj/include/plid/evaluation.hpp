#pragma once

// Calibration-bias sweep, closed/open-world scoring and report files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plid/config.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/model.hpp"
#include "plid/objective.hpp"

namespace plid::evaluation {

enum class Setting { closed, open };

std::string to_string(Setting s);
Setting parse_setting(const std::string &s);

struct CurvePoint {
	double bias = 0.0; // ±inf for the masking sentinels
	double seen_acc = 0.0;
	double unseen_acc = 0.0;

	friend bool operator==(const CurvePoint &, const CurvePoint &) = default;
};

/// Accuracies in percent; auc is the trapezoidal area of the unseen-vs-seen
/// curve divided by 100 (a perfect classifier scores 100).
struct MetricsReport {
	Setting setting = Setting::closed;
	double best_seen = 0.0;
	double best_unseen = 0.0;
	double best_hm = 0.0;
	double auc = 0.0;
	std::vector<CurvePoint> bias_grid;
	std::size_t num_candidates = 0;
	std::size_t num_samples = 0;
	std::optional<double> feasibility_threshold; // open world only
	std::string config_hash;

	nlohmann::json to_json() const;
	static MetricsReport from_json(const nlohmann::json &j);

	friend bool operator==(const MetricsReport &, const MetricsReport &) = default;
};

/// Label index of a sample into the candidate list, or -1 when its class is not a candidate.
using Labels = std::vector<std::int64_t>;

/// Finite biases: grid_size points spanning ±(max |max seen − max unseen| logit gap),
/// with 0 inserted when absent. Sorted ascending.
std::vector<double> bias_grid(const Matrix &logits, const std::vector<bool> &seen_mask, std::size_t grid_size);

/// Seen and unseen sample accuracy (percent) under argmax with bias added to
/// unseen candidates; -inf/+inf restrict the argmax to seen/unseen candidates.
std::pair<double, double> accuracy_at(const Matrix &logits, const Labels &labels, const std::vector<bool> &seen_mask, double bias);

/// Sweeps the calibration bias over bias_grid plus the ±inf sentinels.
/// Throws ValidationError when either sample partition or candidate partition is empty.
MetricsReport bias_sweep(const Matrix &logits, const Labels &labels, const std::vector<bool> &seen_mask, std::size_t grid_size);

/// Candidates, their descriptions and the encoded samples for one scoring pass.
struct ScoringSet {
	objective::ClassContext ctx;
	Batch batch;
	Labels labels;
	std::vector<bool> sample_seen;
};

ScoringSet make_scoring_set(const encoder::Backend &backend, const corpus::Dataset &ds, const std::vector<corpus::Composition> &candidates,
                            const std::vector<corpus::SampleRecord> &samples, const TrainConfig &cfg, bool allow_templates);

/// Eval-mode logits (no dropout): (1 − λ̄)·cosine + λ̄·recomposed, λ̄ = a/(a+b),
/// or pure cosine when decomposition is disabled. samples×candidates.
Matrix score(const ModelParams &params, const encoder::Backend &backend, const ScoringSet &set, const TrainConfig &cfg);

/// seen ∪ unseen_test (closed) or seen ∪ unseen_val (validation).
std::vector<corpus::Composition> closed_candidates(const corpus::CompositionSplit &split, corpus::SampleSplit which);
std::vector<corpus::Composition> all_compositions(const corpus::Vocabulary &vocab);

/// Cosine similarity of the encoded primitive names.
corpus::PrimitiveSimilarity name_similarity(const encoder::Backend &backend, const corpus::Vocabulary &vocab);

/// Closed-world validation metrics used for model selection.
MetricsReport validation_metrics(const ModelParams &params, const encoder::Backend &backend, const ScoringSet &val, const TrainConfig &cfg);

MetricsReport evaluate_closed(const ModelParams &params, const corpus::Dataset &ds, const encoder::Backend &backend, const TrainConfig &cfg);
/// Threshold picked on validation (max best_hm over the distinct feasibility scores), then applied to test.
MetricsReport evaluate_open(const ModelParams &params, const corpus::Dataset &ds, const encoder::Backend &backend, const TrainConfig &cfg);
std::pair<MetricsReport, MetricsReport> evaluate(const ModelParams &params, const corpus::Dataset &ds, const encoder::Backend &backend,
                                                 const TrainConfig &cfg);

/// report.json, curve.csv and curve.svg under dir.
void write_report(const MetricsReport &report, const std::filesystem::path &dir);
MetricsReport read_report(const std::filesystem::path &path);
std::string curve_csv(const MetricsReport &report);
std::string curve_svg(const MetricsReport &report);
/// Plain-text metric table for one or more reports.
std::string metrics_table(const std::vector<MetricsReport> &reports);

} // namespace plid::evaluation
