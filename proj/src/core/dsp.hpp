#pragma once

#include <optional>
#include <span>
#include <vector>

#include "core/types.hpp"

namespace ripple {

// Front-end conditioning parameters. `delay` is the lookahead budget in
// samples granted to each stage: the bandpass group delay must fit in it, and
// the feature stage may peek at most `delay` samples ahead.
struct FrontendConfig {
    double fc_low = 100.0;   // Hz
    double fc_up = 1200.0;   // Hz
    double fs = 5000.0;      // Hz
    int taps = 101;          // FIR length, odd
    bool filter_bank_enabled = false;
    int bank_band_count = 4;
    double bank_q = 4.0;
    int delay = 50;          // samples of permitted lookahead

    void validate() const;
};

// Linear-phase FIR bandpass. Output samples are aligned with input samples:
// push(x[m]) emits y[j] with j = m - group_delay(), so emitted indices carry
// no filter lag. Unit gain at the geometric mid-band.
class FirBandpass {
public:
    FirBandpass(const FrontendConfig& cfg);

    std::optional<double> push(double x);
    int group_delay() const { return centre_; }
    const std::vector<double>& coefficients() const { return h_; }
    void reset();

private:
    std::vector<double> h_;
    std::vector<double> buf_;
    std::size_t pos_ = 0;
    std::size_t pushed_ = 0;
    int centre_;
};

// Second-order resonator bank spanning [fc_low, fc_up] with geometrically
// spaced bands. Exactly one band filters the signal per sample: the band
// containing fs / period_estimate. Without an estimate the input passes
// through untouched.
class FilterBank {
public:
    FilterBank(const FrontendConfig& cfg);

    double push(double x, double period_estimate_samples);
    int band_for(double period_estimate_samples) const;  // -1 when no estimate
    void reset();

private:
    struct Biquad {
        double b0, b1, b2, a1, a2;
        double z1 = 0.0, z2 = 0.0;
        double step(double x);
    };
    bool enabled_;
    double fs_;
    std::vector<double> edges_;  // band_count + 1 values
    std::vector<Biquad> bands_;
};

// Exponentially weighted running mean/deviation normalizer:
// out = (x - mean) / max(std, eps). The window may be retuned on the fly to
// track the ripple period.
class Normalizer {
public:
    explicit Normalizer(double window_samples, double eps = 1e-6);

    double push(double x);
    void set_window(double window_samples);
    double mean() const { return mean_; }
    double stddev() const;
    void reset();

private:
    double alpha_;
    double eps_;
    double mean_ = 0.0;
    double var_ = 0.0;
    bool primed_ = false;
    int seen_ = 0;
};

// Whole-stream convenience wrappers (aligned output, zero-padded edges).
std::vector<double> bandpass(std::span<const double> stream, const FrontendConfig& cfg);
std::vector<double> filter_bank(std::span<const double> stream, const FrontendConfig& cfg,
                                double last_period_estimate);
std::vector<double> normalize(std::span<const double> stream, double window_samples);

// Frequency of the dominant spectral line within [f_min, f_max], via a dense
// Goertzel scan of the mean-removed, Hann-windowed signal with parabolic
// refinement.
double dominant_frequency(std::span<const double> stream, double fs, double f_min, double f_max);

// Amplitude of the steady-state response to a unit tone at f, measured over
// the trailing half of the stream after the filter settles.
double tone_response(std::span<const double> filtered, double fs, double f);

}  // namespace ripple
