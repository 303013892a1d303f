#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "core/dsp.hpp"
#include "core/features.hpp"
#include "core/svm.hpp"
#include "core/types.hpp"

namespace ripple {

struct DetectorConfig {
    int pulse_revolution = 6;
    int num_pulse_mean = 4;  // inter-pulse distances averaged per speed emission

    void validate() const;
};

// Pulse bookkeeping: inter-pulse distances, speed from the mean of the last
// num_pulse_mean distances, position from the running pulse count. Speeds are
// emitted only on detected pulses, and only once enough full intervals exist.
class DetectorState {
public:
    DetectorState(const DetectorConfig& cfg, double fs);

    std::optional<double> update_speed(bool pulse);  // r/min
    double update_position(bool pulse);              // rad

    std::int64_t pulse_count() const { return n_pulse_; }
    std::int64_t distance_since_pulse() const { return d_; }
    const std::vector<double>& recent_intervals() const { return tau_; }

private:
    DetectorConfig cfg_;
    double fs_;
    std::int64_t d_ = 0;
    std::int64_t n_pulse_ = 0;
    bool seen_pulse_ = false;
    std::vector<double> tau_;  // most recent last
    std::size_t tau_cap_;
};

struct EstimateRecord {
    std::int64_t sample_index = 0;
    bool pulse = false;
    bool has_speed = false;
    double speed_rpm = 0.0;
    double position_rad = 0.0;
};

struct PipelineConfig {
    FrontendConfig frontend;
    FeatureConfig features;
    DetectorConfig detector;

    void validate() const;
};

// Full estimation chain: bandpass -> optional filter bank -> normalization ->
// feature extraction -> SVM pulse decision -> speed/position bookkeeping.
// Emitted records are aligned with input sample indices (the FIR group delay
// and feature lookahead are absorbed into processing lag, not timestamps).
class Pipeline {
public:
    Pipeline(SvmModel model, const PipelineConfig& cfg, double fs);

    std::optional<EstimateRecord> push(double raw_sample);
    std::vector<EstimateRecord> run(std::span<const double> raw);

    int lag() const;  // samples of processing latency
    double fs() const { return fs_; }
    const SvmModel& model() const { return model_; }

private:
    SvmModel model_;
    PipelineConfig cfg_;
    double fs_;
    FirBandpass fir_;
    FilterBank bank_;
    Normalizer norm_;
    FeatureExtractor extractor_;
    DetectorState detector_;
    std::int64_t next_index_ = 0;
};

// Detected pulse indices for a whole stream, for corpus tooling.
std::vector<std::int64_t> detect_pulses(const SvmModel& model, const PipelineConfig& cfg,
                                        const SampleStream& stream);

// Solve the speed equation for pulseRevolution on a constant-speed recording:
// run the pipeline, take the mean inter-pulse distance, divide it out of the
// known speed. Rejects non-constant cadence (coefficient of variation > 10%).
int calibrate_pulses_per_revolution(const SampleStream& stream, double known_speed_rpm,
                                    const SvmModel& model, const PipelineConfig& cfg);

}  // namespace ripple
