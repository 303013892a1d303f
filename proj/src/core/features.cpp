#include "core/features.hpp"

#include <algorithm>
#include <cmath>

namespace ripple {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::vector<double> FeatureVector::values() const {
    if (extended)
        return {local_max, mean_rel,       compare_zero,  similarity, rising_edge,
                falling_edge, zero_cross_dist, wave_time, wave_amplitude};
    return {compare_zero, similarity, rising_edge, falling_edge, zero_cross_dist,
            wave_time,    wave_amplitude};
}

void FeatureConfig::validate() const {
    if (hysteresis <= 0.0 || hysteresis >= 1.0) fail_invalid("hysteresis must be in (0, 1)");
    if (delay < 1) fail_invalid("delay must be >= 1");
    if (initial_period < 2.0) fail_invalid("initial_period must be >= 2 samples");
    if (max_period < 4) fail_invalid("max_period must be >= 4");
    if (initial_period > max_period) fail_invalid("initial_period exceeds max_period");
}

int hysteresis_compare(double x, int cz_prev, double hysteresis) {
    if (cz_prev != 0) {
        if (x > -hysteresis) return 1;
        if (x < -hysteresis) return 0;
        return 1;  // exactly on the lower threshold: hold
    }
    if (x > hysteresis) return 1;
    return 0;
}

double shape_similarity(std::span<const double> window, double period) {
    if (period < 2.0) fail_invalid("period must be >= 2");
    if (window.size() < 2) fail_invalid("similarity window must hold >= 2 samples");
    double num = 0.0, ex = 0.0, et = 0.0;
    for (std::size_t k = 0; k < window.size(); ++k) {
        double t = std::cos(kTwoPi * static_cast<double>(k) / period);
        num += window[k] * t;
        ex += window[k] * window[k];
        et += t * t;
    }
    if (ex <= 1e-24 || et <= 1e-24) return 0.0;
    return std::clamp(num / std::sqrt(ex * et), -1.0, 1.0);
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    n_prev_ = cfg_.initial_period;
    ring_.assign(static_cast<std::size_t>(cfg_.max_period + cfg_.delay + 2), 0.0);
}

double FeatureExtractor::buffered(std::int64_t idx) const {
    return ring_[static_cast<std::size_t>(idx % static_cast<std::int64_t>(ring_.size()))];
}

double FeatureExtractor::lookahead_m() const {
    return std::min(0.4 * n_prev_, static_cast<double>(cfg_.delay));
}

std::optional<FeatureVector> FeatureExtractor::push(double x) {
    if (awaiting_commit_) fail_invalid("commit_pulse() must follow every emitted feature vector");
    ring_[static_cast<std::size_t>(pushed_ % static_cast<std::int64_t>(ring_.size()))] = x;
    ++pushed_;
    if (pushed_ <= cfg_.delay) return std::nullopt;

    std::int64_t n = emitted_;  // logical sample index; samples up to n+delay buffered
    double xn = buffered(n);
    double xp = n > 0 ? buffered(n - 1) : xn;
    double not_pul = pul_prev_ ? 0.0 : 1.0;

    FeatureVector fv;
    fv.extended = cfg_.extended;

    int cz_prev = cz_;
    cz_ = hysteresis_compare(xn, cz_prev, cfg_.hysteresis);
    fv.compare_zero = cz_;

    // correlation support: the last floor(N) samples ending at n
    auto support = static_cast<std::int64_t>(std::floor(n_prev_));
    support = std::clamp<std::int64_t>(support, 2, std::min<std::int64_t>(n + 1, cfg_.max_period));
    if (n + 1 >= 2) {
        std::vector<double> window(static_cast<std::size_t>(support));
        for (std::int64_t k = 0; k < support; ++k)
            window[static_cast<std::size_t>(k)] = buffered(n - k);
        fv.similarity = shape_similarity(window, std::max(2.0, n_prev_));
    }

    re_ = static_cast<int>(not_pul) & ((re_ != 0 || (cz_ == 1 && cz_prev == 0)) ? 1 : 0);
    fe_ = static_cast<int>(not_pul) & ((fe_ != 0 || (cz_ == 0 && cz_prev == 1)) ? 1 : 0);
    zcd_ = not_pul * (static_cast<double>(re_) / n_prev_ + zcd_);
    lwt_ = not_pul * (1.0 / n_prev_ + lwt_);
    lwa_ = not_pul * (std::abs(xn - xp) + lwa_);
    fv.rising_edge = re_;
    fv.falling_edge = fe_;
    fv.zero_cross_dist = zcd_;
    fv.wave_time = lwt_;
    fv.wave_amplitude = lwa_;

    if (cfg_.extended) {
        auto m = static_cast<std::int64_t>(std::floor(lookahead_m()));
        m = std::max<std::int64_t>(m, 1);
        std::int64_t lo = std::max<std::int64_t>(0, n - m);
        std::int64_t hi = n + m;  // buffered: m <= delay
        bool is_max = true;
        double mean = 0.0;
        for (std::int64_t j = lo; j <= hi; ++j) {
            double v = buffered(j);
            mean += v;
            if (j != n && v > xn) is_max = false;
        }
        mean /= static_cast<double>(hi - lo + 1);
        double max_dev = 0.0;
        for (std::int64_t j = lo; j <= hi; ++j)
            max_dev = std::max(max_dev, std::abs(buffered(j) - mean));
        fv.local_max = is_max ? 1.0 : 0.0;
        fv.mean_rel = max_dev > 1e-12 ? (xn - mean) / max_dev : 0.0;
    }

    // period tracking: N is the distance between the last two pulses, so the
    // first detection only starts the counter; the running counter resets on
    // the sample after any pulse
    if (pul_prev_) {
        if (seen_pulse_)
            n_prev_ = std::clamp(np_ + 1.0, 2.0, static_cast<double>(cfg_.max_period));
        seen_pulse_ = true;
        np_ = 0.0;
    } else {
        np_ += 1.0;
    }

    ++emitted_;
    awaiting_commit_ = true;
    return fv;
}

void FeatureExtractor::commit_pulse(bool pulse) {
    if (!awaiting_commit_) fail_invalid("commit_pulse() without a pending feature vector");
    pul_prev_ = pulse;
    awaiting_commit_ = false;
}

}  // namespace ripple
