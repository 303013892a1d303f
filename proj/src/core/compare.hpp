#pragma once

#include <optional>

#include "core/baselines.hpp"
#include "core/csv.hpp"
#include "core/detector.hpp"
#include "core/types.hpp"

namespace ripple {

// Score one detector's pulse train against ground truth inside a measurement
// window that skips warm-up and tail edges. count_error = extras - missed,
// which for the comparator baselines equals (injected false - masked ghost).
struct DetectionScore {
    std::int64_t truth_in_window = 0;
    std::int64_t detected_in_window = 0;
    std::int64_t matched = 0;
    std::int64_t missed = 0;
    std::int64_t extras = 0;
    std::vector<std::int64_t> extra_indices;
    std::vector<std::int64_t> missed_truth_indices;

    std::int64_t count_error() const { return extras - missed; }
};

DetectionScore score_detections(const std::vector<std::int64_t>& detections,
                                const GroundTruth& truth, double fs, int pulse_revolution,
                                std::int64_t window_lo, std::int64_t window_hi);

// Run the SVM detector (when a model is given) plus the three comparator
// baselines over one stream and tabulate counts and per-corruption outcomes.
ComparisonTable compare_methods(const SampleStream& stream, const GroundTruth& truth,
                                const std::optional<SvmModel>& model, const PipelineConfig& cfg,
                                const BaselineParams& baseline_params,
                                const std::vector<CorruptionEvent>& events);

}  // namespace ripple
