#include "core/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ripple {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void DetectorConfig::validate() const {
    if (pulse_revolution < 1) fail_invalid("pulse_revolution must be >= 1");
    if (num_pulse_mean < 1) fail_invalid("num_pulse_mean must be >= 1");
}

DetectorState::DetectorState(const DetectorConfig& cfg, double fs) : cfg_(cfg), fs_(fs) {
    cfg.validate();
    if (fs <= 0.0) fail_invalid("fs must be positive");
    tau_cap_ = static_cast<std::size_t>(std::max(cfg.num_pulse_mean, 16));
}

std::optional<double> DetectorState::update_speed(bool pulse) {
    ++d_;
    if (!pulse) return std::nullopt;
    if (!seen_pulse_) {
        // first pulse: starts the first interval, no distance to record yet
        seen_pulse_ = true;
        d_ = 0;
        return std::nullopt;
    }
    tau_.push_back(static_cast<double>(d_));
    if (tau_.size() > tau_cap_) tau_.erase(tau_.begin());
    d_ = 0;
    if (tau_.size() < static_cast<std::size_t>(cfg_.num_pulse_mean)) return std::nullopt;
    double sum = 0.0;
    for (std::size_t i = tau_.size() - static_cast<std::size_t>(cfg_.num_pulse_mean);
         i < tau_.size(); ++i)
        sum += tau_[i];
    return fs_ * cfg_.num_pulse_mean / sum * 60.0 / cfg_.pulse_revolution;
}

double DetectorState::update_position(bool pulse) {
    if (pulse) ++n_pulse_;
    return kTwoPi * static_cast<double>(n_pulse_) / cfg_.pulse_revolution;
}

void PipelineConfig::validate() const {
    frontend.validate();
    features.validate();
    detector.validate();
}

namespace {
PipelineConfig with_fs(PipelineConfig cfg, double fs) {
    cfg.frontend.fs = fs;
    cfg.validate();
    return cfg;
}
}  // namespace

Pipeline::Pipeline(SvmModel model, const PipelineConfig& cfg, double fs)
    : model_(std::move(model)),
      cfg_(with_fs(cfg, fs)),
      fs_(fs),
      fir_(cfg_.frontend),
      bank_(cfg_.frontend),
      norm_(4.0 * cfg_.features.initial_period),
      extractor_(cfg_.features),
      detector_(cfg_.detector, fs) {
    std::size_t expect = cfg_.features.extended ? 9 : 7;
    if (model_.dim() != 0 && model_.dim() != expect)
        fail_invalid("model dimension does not match the feature configuration");
}

std::optional<EstimateRecord> Pipeline::push(double raw_sample) {
    auto filtered = fir_.push(raw_sample);
    if (!filtered) return std::nullopt;
    double banked = bank_.push(*filtered, extractor_.period_estimate());
    norm_.set_window(std::max(8.0, 4.0 * extractor_.period_estimate()));
    double normalized = norm_.push(banked);
    auto fv = extractor_.push(normalized);
    if (!fv) return std::nullopt;

    bool pulse = model_.decide(fv->values()) > 0;
    extractor_.commit_pulse(pulse);

    EstimateRecord rec;
    rec.sample_index = next_index_++;
    rec.pulse = pulse;
    auto speed = detector_.update_speed(pulse);
    rec.has_speed = speed.has_value();
    rec.speed_rpm = speed.value_or(0.0);
    rec.position_rad = detector_.update_position(pulse);
    return rec;
}

std::vector<EstimateRecord> Pipeline::run(std::span<const double> raw) {
    std::vector<EstimateRecord> out;
    out.reserve(raw.size());
    for (double x : raw)
        if (auto rec = push(x)) out.push_back(*rec);
    return out;
}

int Pipeline::lag() const { return fir_.group_delay() + extractor_.lag(); }

std::vector<std::int64_t> detect_pulses(const SvmModel& model, const PipelineConfig& cfg,
                                        const SampleStream& stream) {
    Pipeline p(model, cfg, stream.fs);
    std::vector<std::int64_t> pulses;
    for (double x : stream.current)
        if (auto rec = p.push(x))
            if (rec->pulse) pulses.push_back(rec->sample_index);
    return pulses;
}

int calibrate_pulses_per_revolution(const SampleStream& stream, double known_speed_rpm,
                                    const SvmModel& model, const PipelineConfig& cfg) {
    if (known_speed_rpm <= 0.0) fail_invalid("known speed must be positive");
    if (stream.size() < 32) fail_invalid("stream too short for calibration");

    // Seed the period tracker from the spectrum rather than from a speed
    // guess: the pulses-per-revolution count is exactly what we do not know.
    auto filtered = bandpass(stream.current, [&] {
        FrontendConfig fe = cfg.frontend;
        fe.fs = stream.fs;
        return fe;
    }());
    double f_ripple = dominant_frequency(filtered, stream.fs, cfg.frontend.fc_low, cfg.frontend.fc_up);

    PipelineConfig run_cfg = cfg;
    run_cfg.features.initial_period = std::clamp(stream.fs / f_ripple, 2.0,
                                                 static_cast<double>(cfg.features.max_period));
    auto pulses = detect_pulses(model, run_cfg, stream);
    if (pulses.size() < 8)
        throw Error(ErrorCode::invalid_argument,
                    "calibration rejected: too few detected pulses (" +
                        std::to_string(pulses.size()) + ")");

    std::vector<double> tau;
    for (std::size_t i = 1; i < pulses.size(); ++i)
        tau.push_back(static_cast<double>(pulses[i] - pulses[i - 1]));
    double mean = std::accumulate(tau.begin(), tau.end(), 0.0) / static_cast<double>(tau.size());
    double var = 0.0;
    for (double t : tau) var += (t - mean) * (t - mean);
    double cv = std::sqrt(var / static_cast<double>(tau.size())) / mean;
    if (cv > 0.10)
        throw Error(ErrorCode::invalid_argument,
                    "calibration rejected: pulse cadence not constant (cv=" + std::to_string(cv) + ")");

    double ppr = stream.fs / mean * 60.0 / known_speed_rpm;
    int rounded = static_cast<int>(std::lround(ppr));
    if (rounded < 1)
        throw Error(ErrorCode::invalid_argument, "calibration rejected: implied pulses/rev < 1");
    return rounded;
}

}  // namespace ripple
