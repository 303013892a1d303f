#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "core/types.hpp"

namespace ripple {

// Per-sample classifier inputs. The core seven features; two reconstructed
// extras (local-maximum score and mean-relative amplitude) can be prepended
// when `extended` extraction is on. The extras are not part of the published
// feature set and are excluded from the anchored tests.
struct FeatureVector {
    double local_max = 0.0;   // extended: 1 when the sample tops its +-M window
    double mean_rel = 0.0;    // extended: amplitude relative to the window mean, in [-1, 1]
    double compare_zero = 0.0;   // cZ
    double similarity = 0.0;     // s, cosine-template correlation in [-1, 1]
    double rising_edge = 0.0;    // rE
    double falling_edge = 0.0;   // fE
    double zero_cross_dist = 0.0;  // zCD, periods since the rising edge
    double wave_time = 0.0;        // Lwt, periods since the last pulse
    double wave_amplitude = 0.0;   // Lwa, accumulated |dx| since the last pulse

    bool extended = true;

    std::size_t dim() const { return extended ? 9 : 7; }
    std::vector<double> values() const;
};

struct FeatureConfig {
    double hysteresis = 0.4;        // hyUmb, sensible range 0.3..0.5
    int delay = 50;                 // lookahead budget in samples
    double initial_period = 50.0;   // N seed, samples (from the expected startup speed)
    int max_period = 4096;          // clamp on tracked N
    bool extended = true;

    void validate() const;
};

// Hysteresis comparator branch table: keeps its state inside the +-hysteresis
// dead band.
int hysteresis_compare(double x, int cz_prev, double hysteresis);

// Normalized cross-correlation of `window` (newest sample first) against the
// cosine ripple template of period `period`. Zero-energy windows score 0.
double shape_similarity(std::span<const double> window, double period);

// Streaming extractor. push() consumes one normalized sample and, once the
// lookahead is primed, emits the feature vector for logical sample index
// emitted_count-1. After every emitted vector the caller must report the
// classifier verdict through commit_pulse() before pushing the next sample.
class FeatureExtractor {
public:
    FeatureExtractor(const FeatureConfig& cfg);

    std::optional<FeatureVector> push(double x);
    void commit_pulse(bool pulse);

    double period_estimate() const { return n_prev_; }       // N[n-1]
    double samples_since_pulse() const { return np_; }       // N_p
    double lookahead_m() const;                              // M = min(0.4 N, delay)
    int lag() const { return cfg_.delay; }
    std::int64_t emitted() const { return emitted_; }

private:
    double buffered(std::int64_t idx) const;

    FeatureConfig cfg_;
    std::vector<double> ring_;
    std::int64_t pushed_ = 0;
    std::int64_t emitted_ = 0;
    bool awaiting_commit_ = false;

    int cz_ = 0;
    int re_ = 0;
    int fe_ = 0;
    double zcd_ = 0.0;
    double lwt_ = 0.0;
    double lwa_ = 0.0;
    bool pul_prev_ = false;
    bool seen_pulse_ = false;
    double n_prev_;
    double np_ = 0.0;
};

}  // namespace ripple
