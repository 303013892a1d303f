#include "core/compare.hpp"

#include <algorithm>
#include <cmath>

namespace ripple {

namespace {

double period_at(const GroundTruth& truth, double fs, int ppr, std::int64_t i) {
    auto idx = std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(truth.speed_rpm.size()) - 1);
    return fs / (truth.speed_rpm[static_cast<std::size_t>(idx)] / 60.0 * ppr);
}

}  // namespace

DetectionScore score_detections(const std::vector<std::int64_t>& detections,
                                const GroundTruth& truth, double fs, int pulse_revolution,
                                std::int64_t window_lo, std::int64_t window_hi) {
    DetectionScore score;
    std::vector<bool> used(detections.size(), false);

    for (std::int64_t p : truth.pulse_indices) {
        bool in_window = p >= window_lo && p < window_hi;
        if (in_window) ++score.truth_in_window;
        double tol = 0.5 * period_at(truth, fs, pulse_revolution, p);
        auto it = std::lower_bound(detections.begin(), detections.end(),
                                   p - static_cast<std::int64_t>(tol) - 1);
        bool matched = false;
        for (; it != detections.end() && static_cast<double>(*it) <= static_cast<double>(p) + tol;
             ++it) {
            auto k = static_cast<std::size_t>(it - detections.begin());
            if (!used[k]) {
                used[k] = true;
                matched = true;
                break;
            }
        }
        if (in_window) {
            if (matched)
                ++score.matched;
            else {
                ++score.missed;
                score.missed_truth_indices.push_back(p);
            }
        }
    }
    for (std::size_t k = 0; k < detections.size(); ++k) {
        if (detections[k] >= window_lo && detections[k] < window_hi) {
            ++score.detected_in_window;
            if (!used[k]) {
                ++score.extras;
                score.extra_indices.push_back(detections[k]);
            }
        }
    }
    return score;
}

ComparisonTable compare_methods(const SampleStream& stream, const GroundTruth& truth,
                                const std::optional<SvmModel>& model, const PipelineConfig& cfg,
                                const BaselineParams& baseline_params,
                                const std::vector<CorruptionEvent>& events) {
    if (stream.size() != truth.speed_rpm.size())
        fail_invalid("stream and ground truth lengths differ");
    double fs = stream.fs;
    int ppr = cfg.detector.pulse_revolution;

    // the window must exclude the head (filter and DC-tracker settling) and
    // the tail the lagged pipeline cannot report on
    double p0 = period_at(truth, fs, ppr, 0);
    auto lag = static_cast<std::int64_t>(cfg.frontend.delay + cfg.features.delay);
    // slowest stage: the low-pass DC tracker at fc_low/4 needs ~4.6 time
    // constants to settle within a percent
    auto settle = static_cast<std::int64_t>(std::ceil(3.0 * fs / baseline_params.fc_low));
    auto window_lo = std::max({static_cast<std::int64_t>(std::ceil(4.0 * p0)),
                               lag + static_cast<std::int64_t>(std::ceil(2.0 * p0)), settle});
    auto window_hi = static_cast<std::int64_t>(stream.size()) -
                     std::max(static_cast<std::int64_t>(std::ceil(4.0 * p0)),
                              lag + static_cast<std::int64_t>(std::ceil(p0)));
    if (window_hi <= window_lo) fail_invalid("stream too short to compare detectors");

    struct Method {
        std::string name;
        std::vector<std::int64_t> detections;
    };
    std::vector<Method> methods;
    if (model) methods.push_back({"svm", detect_pulses(*model, cfg, stream)});
    for (auto [kind, name] :
         {std::pair{BaselineKind::minmax_mean, "minmax_mean"},
          std::pair{BaselineKind::highpass_zero, "highpass_zero"},
          std::pair{BaselineKind::lowpass_dc, "lowpass_dc"}}) {
        methods.push_back({name, baseline_detect(stream, kind, baseline_params)});
    }

    ComparisonTable table;
    for (const auto& m : methods) {
        auto score = score_detections(m.detections, truth, fs, ppr, window_lo, window_hi);
        table.summaries.push_back(
            ComparisonSummaryRow{m.name, score.detected_in_window, score.truth_in_window,
                                 score.count_error()});
        for (const auto& ev : events) {
            auto at = static_cast<std::int64_t>(ev.time_s * fs);
            double tol = 0.75 * period_at(truth, fs, ppr, at);
            ComparisonEventRow row;
            row.method = m.name;
            row.event = ev;
            if (ev.ghost) {
                // the masked excursion sits at the true pulse nearest the script time
                std::int64_t nearest = -1;
                for (std::int64_t p : truth.pulse_indices)
                    if (nearest < 0 || std::llabs(p - at) < std::llabs(nearest - at)) nearest = p;
                bool missed = std::any_of(score.missed_truth_indices.begin(),
                                          score.missed_truth_indices.end(),
                                          [&](std::int64_t p) { return p == nearest; });
                row.outcome = missed ? "missed" : "detected";
            } else {
                bool counted = std::any_of(
                    score.extra_indices.begin(), score.extra_indices.end(), [&](std::int64_t d) {
                        return std::abs(static_cast<double>(d - at)) <= tol;
                    });
                row.outcome = counted ? "accepted" : "discarded";
            }
            table.events.push_back(std::move(row));
        }
    }
    return table;
}

}  // namespace ripple
