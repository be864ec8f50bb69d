#pragma once

#include <string>
#include <vector>

#include "plid/config.hpp"
#include "plid/corpus.hpp"
#include "plid/encoder.hpp"
#include "plid/model.hpp"

namespace plid {

struct GradcheckOptions {
	std::size_t samples = 2;           // training images in the batch
	std::size_t entries_per_tensor = 12; // 0 checks every entry
	double step = 1e-3;
	double floor = 1e-6; // denominator floor of the relative error
	double perturb = 0.02; // seeded noise added to the initialization
};

struct GradcheckEntry {
	std::string tensor;
	std::size_t index = 0;
	double analytic = 0.0;
	double numeric = 0.0;
	double rel_error = 0.0;
};

struct GradcheckReport {
	std::vector<GradcheckEntry> entries;
	double max_rel_error = 0.0;
	std::string worst;

	bool passed(double tolerance = 1e-4) const { return max_rel_error < tolerance; }
};

/// |a − n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central finite differences of total_loss against the analytic gradient, with
/// fixed dropout masks, a fixed λ and margins rebuilt on every evaluation.
GradcheckReport gradcheck(const corpus::Dataset &ds, const encoder::Backend &backend, const TrainConfig &cfg,
                          const GradcheckOptions &options = {});

} // namespace plid
