#include "core/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace ripple {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.283185307179586476925286766559;

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

double fir_gain_at(const std::vector<double>& h, double f_norm) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t k = 0; k < h.size(); ++k)
        acc += h[k] * std::exp(std::complex<double>(0.0, -kTwoPi * f_norm * static_cast<double>(k)));
    return std::abs(acc);
}
}  // namespace

void FrontendConfig::validate() const {
    if (fs <= 0.0) fail_invalid("fs must be positive");
    if (!(0.0 < fc_low && fc_low < fc_up && fc_up < fs / 2.0))
        fail_invalid("cutoffs must satisfy 0 < fc_low < fc_up < fs/2");
    if (taps < 3 || taps % 2 == 0) fail_invalid("taps must be odd and >= 3");
    if (delay < 1) fail_invalid("delay must be >= 1");
    if ((taps - 1) / 2 > delay) fail_invalid("FIR group delay exceeds the lookahead budget");
    if (bank_band_count < 1) fail_invalid("bank_band_count must be >= 1");
    if (bank_q <= 0.0) fail_invalid("bank_q must be positive");
}

FirBandpass::FirBandpass(const FrontendConfig& cfg) {
    cfg.validate();
    int taps = cfg.taps;
    centre_ = (taps - 1) / 2;
    h_.resize(taps);
    double f1 = cfg.fc_low / cfg.fs;
    double f2 = cfg.fc_up / cfg.fs;
    for (int k = 0; k < taps; ++k) {
        double m = static_cast<double>(k - centre_);
        double ideal = 2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m);
        double hamming = 0.54 - 0.46 * std::cos(kTwoPi * k / (taps - 1));
        h_[static_cast<std::size_t>(k)] = ideal * hamming;
    }
    double mid = std::sqrt(f1 * f2);
    double g = fir_gain_at(h_, mid);
    if (g > 0.0)
        for (auto& c : h_) c /= g;
    buf_.assign(h_.size(), 0.0);
}

std::optional<double> FirBandpass::push(double x) {
    buf_[pos_] = x;
    pos_ = (pos_ + 1) % buf_.size();
    ++pushed_;
    if (pushed_ <= static_cast<std::size_t>(centre_)) return std::nullopt;
    double acc = 0.0;
    // newest sample is at pos_-1; h_[0] multiplies it
    std::size_t idx = (pos_ + buf_.size() - 1) % buf_.size();
    for (std::size_t k = 0; k < h_.size(); ++k) {
        acc += h_[k] * buf_[idx];
        idx = (idx + buf_.size() - 1) % buf_.size();
    }
    return acc;
}

void FirBandpass::reset() {
    std::fill(buf_.begin(), buf_.end(), 0.0);
    pos_ = 0;
    pushed_ = 0;
}

double FilterBank::Biquad::step(double x) {
    double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
}

FilterBank::FilterBank(const FrontendConfig& cfg) : enabled_(cfg.filter_bank_enabled), fs_(cfg.fs) {
    cfg.validate();
    int nb = cfg.bank_band_count;
    double ratio = std::pow(cfg.fc_up / cfg.fc_low, 1.0 / nb);
    edges_.resize(static_cast<std::size_t>(nb) + 1);
    for (int i = 0; i <= nb; ++i) edges_[static_cast<std::size_t>(i)] = cfg.fc_low * std::pow(ratio, i);
    for (int i = 0; i < nb; ++i) {
        double fc = std::sqrt(edges_[static_cast<std::size_t>(i)] * edges_[static_cast<std::size_t>(i) + 1]);
        double w0 = kTwoPi * fc / fs_;
        double alpha = std::sin(w0) / (2.0 * cfg.bank_q);
        double a0 = 1.0 + alpha;
        // constant 0 dB peak gain bandpass
        bands_.push_back(Biquad{alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0,
                                (1.0 - alpha) / a0});
    }
}

int FilterBank::band_for(double period_estimate_samples) const {
    if (!enabled_ || period_estimate_samples <= 0.0) return -1;
    double f = fs_ / period_estimate_samples;
    if (f <= edges_.front()) return 0;
    if (f >= edges_.back()) return static_cast<int>(bands_.size()) - 1;
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i)
        if (f < edges_[i + 1]) return static_cast<int>(i);
    return static_cast<int>(bands_.size()) - 1;
}

double FilterBank::push(double x, double period_estimate_samples) {
    int sel = band_for(period_estimate_samples);
    double out = x;
    // All resonators track the signal so band switches start from warm state.
    for (std::size_t i = 0; i < bands_.size(); ++i) {
        double y = bands_[i].step(x);
        if (static_cast<int>(i) == sel) out = y;
    }
    return out;
}

void FilterBank::reset() {
    for (auto& b : bands_) b.z1 = b.z2 = 0.0;
}

Normalizer::Normalizer(double window_samples, double eps) : eps_(eps) {
    set_window(window_samples);
}

void Normalizer::set_window(double window_samples) {
    if (window_samples < 2.0) fail_invalid("normalizer window must be >= 2 samples");
    alpha_ = 2.0 / (window_samples + 1.0);
}

double Normalizer::push(double x) {
    if (!primed_) {
        mean_ = x;
        var_ = 0.0;
        primed_ = true;
        seen_ = 1;
        return 0.0;
    }
    double d = x - mean_;
    mean_ += alpha_ * d;
    var_ = (1.0 - alpha_) * (var_ + alpha_ * d * d);
    // the deviation estimate is meaningless for the first few samples and the
    // epsilon guard would blow the output up by orders of magnitude
    if (++seen_ < 12) return 0.0;
    return (x - mean_) / std::max(std::sqrt(var_), eps_);
}

double Normalizer::stddev() const { return std::sqrt(var_); }

void Normalizer::reset() {
    mean_ = 0.0;
    var_ = 0.0;
    primed_ = false;
    seen_ = 0;
}

std::vector<double> bandpass(std::span<const double> stream, const FrontendConfig& cfg) {
    FirBandpass fir(cfg);
    std::vector<double> out;
    out.reserve(stream.size());
    for (double x : stream)
        if (auto y = fir.push(x)) out.push_back(*y);
    while (out.size() < stream.size()) {
        auto y = fir.push(0.0);
        out.push_back(y.value_or(0.0));
    }
    return out;
}

std::vector<double> filter_bank(std::span<const double> stream, const FrontendConfig& cfg,
                                double last_period_estimate) {
    FilterBank bank(cfg);
    std::vector<double> out;
    out.reserve(stream.size());
    for (double x : stream) out.push_back(bank.push(x, last_period_estimate));
    return out;
}

std::vector<double> normalize(std::span<const double> stream, double window_samples) {
    Normalizer norm(window_samples);
    std::vector<double> out;
    out.reserve(stream.size());
    for (double x : stream) out.push_back(norm.push(x));
    return out;
}

double dominant_frequency(std::span<const double> stream, double fs, double f_min, double f_max) {
    if (stream.size() < 16) fail_invalid("stream too short for spectral estimation");
    if (!(0.0 < f_min && f_min < f_max && f_max <= fs / 2.0)) fail_invalid("bad frequency range");
    std::size_t n = stream.size();
    double mean = 0.0;
    for (double v : stream) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1));
        x[i] = (stream[i] - mean) * w;
    }

    double df = std::max(fs / static_cast<double>(n) / 4.0, (f_max - f_min) / 20000.0);
    auto power_at = [&](double f) {
        // Goertzel
        double w = kTwoPi * f / fs;
        double coeff = 2.0 * std::cos(w);
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s0 = x[i] + coeff * s1 - s2;
            s2 = s1;
            s1 = s0;
        }
        return s1 * s1 + s2 * s2 - coeff * s1 * s2;
    };

    double best_f = f_min, best_p = -1.0;
    for (double f = f_min; f <= f_max; f += df) {
        double p = power_at(f);
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    // parabolic refinement around the winning bin
    double pm = power_at(std::max(f_min, best_f - df));
    double pp = power_at(std::min(f_max, best_f + df));
    double denom = pm - 2.0 * best_p + pp;
    if (std::abs(denom) > 1e-30) {
        double shift = 0.5 * (pm - pp) / denom;
        best_f += std::clamp(shift, -1.0, 1.0) * df;
    }
    return best_f;
}

double tone_response(std::span<const double> filtered, double fs, double f) {
    std::size_t n = filtered.size();
    std::size_t start = n / 2;
    double c = 0.0, s = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        double ph = kTwoPi * f * static_cast<double>(i) / fs;
        c += filtered[i] * std::cos(ph);
        s += filtered[i] * std::sin(ph);
    }
    double m = static_cast<double>(n - start);
    return 2.0 * std::sqrt(c * c + s * s) / m;
}

}  // namespace ripple
