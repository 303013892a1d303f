#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/dsp.hpp"
#include "core/features.hpp"
#include "core/rng.hpp"
#include "core/sim.hpp"
#include "core/types.hpp"

using namespace ripple;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

FeatureConfig small_cfg(double n0 = 10.0, int delay = 4) {
    FeatureConfig cfg;
    cfg.hysteresis = 0.4;
    cfg.delay = delay;
    cfg.initial_period = n0;
    cfg.extended = false;
    return cfg;
}

// drive the extractor over a sample sequence with a caller-chosen pulse
// feedback; returns all emitted vectors
std::vector<FeatureVector> drive(FeatureExtractor& fx, const std::vector<double>& xs,
                                 const std::vector<std::int64_t>& pulses_at = {}) {
    std::vector<FeatureVector> out;
    for (double x : xs) {
        auto fv = fx.push(x);
        if (!fv) continue;
        std::int64_t i = fx.emitted() - 1;
        bool pulse = std::find(pulses_at.begin(), pulses_at.end(), i) != pulses_at.end();
        fx.commit_pulse(pulse);
        out.push_back(*fv);
    }
    return out;
}

}  // namespace

TEST_CASE("hysteresis comparator branches") {
    CHECK(hysteresis_compare(0.5, 0, 0.4) == 1);
    CHECK(hysteresis_compare(-0.2, 1, 0.4) == 1);  // -0.2 > -0.4 holds the state
    CHECK(hysteresis_compare(-0.5, 1, 0.4) == 0);
    CHECK(hysteresis_compare(0.3, 0, 0.4) == 0);
    CHECK(hysteresis_compare(0.3, 1, 0.4) == 1);
}

TEST_CASE("shape similarity against the cosine template") {
    int n = 24;
    std::vector<double> cosw(n), neg(n), sinw(n);
    for (int k = 0; k < n; ++k) {
        cosw[static_cast<std::size_t>(k)] = std::cos(kTwoPi * k / n);
        neg[static_cast<std::size_t>(k)] = -cosw[static_cast<std::size_t>(k)];
        sinw[static_cast<std::size_t>(k)] = std::sin(kTwoPi * k / n);
    }
    CHECK(shape_similarity(cosw, n) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(shape_similarity(neg, n) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(shape_similarity(sinw, n)) <= 1e-12);  // orthogonal over a period

    std::vector<double> zeros(n, 0.0);
    CHECK(shape_similarity(zeros, n) == 0.0);
}

TEST_CASE("a committed pulse zeroes every recurrence on the next sample") {
    auto cfg = small_cfg();
    FeatureExtractor fx(cfg);
    Rng rng(3);
    std::vector<double> xs(40);
    for (auto& v : xs) v = rng.gaussian();
    auto out = drive(fx, xs, {12});
    // logical sample 13 follows the committed pulse at 12
    const auto& fv = out[13];
    CHECK(fv.rising_edge == 0.0);
    CHECK(fv.falling_edge == 0.0);
    CHECK(fv.zero_cross_dist == 0.0);
    CHECK(fv.wave_time == 0.0);
    CHECK(fv.wave_amplitude == 0.0);
}

TEST_CASE("wave time accumulates one period over N samples") {
    auto cfg = small_cfg(10.0);
    FeatureExtractor fx(cfg);
    std::vector<double> xs(40, 0.0);
    auto out = drive(fx, xs);  // no pulses: N stays at its initial 10
    CHECK(out[9].wave_time == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out[19].wave_time - out[9].wave_time == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rising edge latches on a low-to-high crossing until the next pulse") {
    auto cfg = small_cfg();
    FeatureExtractor fx(cfg);
    std::vector<double> xs(30, -0.5);
    for (std::size_t i = 10; i < xs.size(); ++i) xs[i] = 0.5;
    auto out = drive(fx, xs, {20});
    CHECK(out[9].rising_edge == 0.0);
    for (std::size_t i = 10; i <= 20; ++i) CHECK(out[i].rising_edge == 1.0);
    CHECK(out[21].rising_edge == 0.0);
    // zero crossing distance counts from the edge, in period units
    CHECK(out[10].zero_cross_dist == doctest::Approx(0.1));
    CHECK(out[15].zero_cross_dist == doctest::Approx(0.6));
}

TEST_CASE("falling edge latches on a high-to-low crossing") {
    auto cfg = small_cfg();
    FeatureExtractor fx(cfg);
    std::vector<double> xs(30, 0.5);
    for (std::size_t i = 10; i < xs.size(); ++i) xs[i] = -0.5;
    auto out = drive(fx, xs, {});
    CHECK(out[9].falling_edge == 0.0);
    CHECK(out[10].falling_edge == 1.0);
    CHECK(out[25].falling_edge == 1.0);
}

TEST_CASE("period tracking captures the distance between the last two pulses") {
    auto cfg = small_cfg(30.0, 4);
    FeatureExtractor fx(cfg);
    std::vector<double> xs(200, 0.0);
    std::vector<std::int64_t> pulses = {100, 150};
    for (double x : xs) {
        auto fv = fx.push(x);
        if (!fv) continue;
        std::int64_t i = fx.emitted() - 1;
        if (i < 100) CHECK(fx.period_estimate() == 30.0);  // initial value retained
        fx.commit_pulse(std::find(pulses.begin(), pulses.end(), i) != pulses.end());
    }
    CHECK(fx.period_estimate() == 50.0);
}

TEST_CASE("lookahead window M follows min(0.4 N, delay)") {
    FeatureExtractor fx(small_cfg(50.0, 30));
    CHECK(fx.lookahead_m() == doctest::Approx(20.0));
    FeatureExtractor fx2(small_cfg(100.0, 30));
    CHECK(fx2.lookahead_m() == doctest::Approx(30.0));
}

TEST_CASE("clean simulated stream yields one qualifying sample per period") {
    MotorSpec motor{2, 3, 12.0, 0.53, 1.8, 0.0178};
    CorruptionScript no_noise;
    no_noise.noise_rms = 0.0;
    double fs = 5000.0, rpm = 3000.0;
    auto sim = generate(motor, RippleShape{}, SpeedProfile::constant(rpm, 1.5), no_noise, fs, 77);

    FrontendConfig fe;
    fe.fc_low = 100.0;
    fe.fc_up = 1200.0;
    fe.fs = fs;
    double n0 = fs / (rpm / 60.0 * motor.pulses_per_revolution());

    auto filtered = bandpass(sim.stream.current, fe);
    // snap each truth pulse onto the filtered peak, +-1 sample
    std::vector<std::int64_t> snapped;
    for (auto p : sim.truth.pulse_indices) {
        std::int64_t best = p;
        for (std::int64_t j = p - 1; j <= p + 1; ++j)
            if (j >= 0 && j < static_cast<std::int64_t>(filtered.size()) &&
                filtered[static_cast<std::size_t>(j)] > filtered[static_cast<std::size_t>(best)])
                best = j;
        snapped.push_back(best);
    }

    FeatureConfig fc;
    fc.delay = 50;
    fc.initial_period = n0;
    fc.extended = false;
    FeatureExtractor fx(fc);
    Normalizer norm(4.0 * n0);

    std::vector<FeatureVector> rows;
    for (double v : filtered) {
        auto fv = fx.push(norm.push(v));
        if (!fv) continue;
        std::int64_t i = fx.emitted() - 1;
        bool pulse = std::binary_search(snapped.begin(), snapped.end(), i);
        fx.commit_pulse(pulse);
        rows.push_back(*fv);
    }

    // per settled period, exactly one sample matches the pulse signature
    std::size_t start_pulse = 8;
    for (std::size_t k = start_pulse; k + 1 < snapped.size(); ++k) {
        if (snapped[k + 1] >= static_cast<std::int64_t>(rows.size())) break;
        int qualifying = 0;
        for (std::int64_t i = snapped[k] + 1; i <= snapped[k + 1]; ++i) {
            const auto& fv = rows[static_cast<std::size_t>(i)];
            if (fv.similarity > 0.9 && fv.rising_edge == 1.0 && fv.wave_time >= 0.8 &&
                fv.wave_time <= 1.2)
                ++qualifying;
        }
        CHECK(qualifying == 1);
    }
}

TEST_CASE("property: reset completeness after any pulse") {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        auto cfg = small_cfg(4.0 + rng.uniform(0.0, 20.0), 2 + static_cast<int>(rng.index(6)));
        FeatureExtractor fx(cfg);
        int len = 20 + static_cast<int>(rng.index(30));
        std::int64_t pulse_at = 2 + static_cast<std::int64_t>(rng.index(8));
        bool checked = false;
        for (int i = 0; i < len; ++i) {
            auto fv = fx.push(rng.gaussian());
            if (!fv) continue;
            std::int64_t idx = fx.emitted() - 1;
            if (idx == pulse_at + 1) {
                CHECK(fv->rising_edge == 0.0);
                CHECK(fv->falling_edge == 0.0);
                CHECK(fv->zero_cross_dist == 0.0);
                CHECK(fv->wave_time == 0.0);
                CHECK(fv->wave_amplitude == 0.0);
                checked = true;
            }
            fx.commit_pulse(idx == pulse_at);
        }
        CHECK(checked);
    }
}

TEST_CASE("property: counters are monotone between pulses") {
    Rng rng(202);
    for (int trial = 0; trial < 1000; ++trial) {
        auto cfg = small_cfg(4.0 + rng.uniform(0.0, 12.0), 3);
        FeatureExtractor fx(cfg);
        double prev_lwt = -1.0, prev_lwa = -1.0, prev_zcd = -1.0;
        for (int i = 0; i < 40; ++i) {
            auto fv = fx.push(rng.gaussian());
            if (!fv) continue;
            if (prev_lwt >= 0.0) {
                CHECK(fv->wave_time >= prev_lwt);
                CHECK(fv->wave_amplitude >= prev_lwa);
                CHECK(fv->zero_cross_dist >= prev_zcd);
            }
            prev_lwt = fv->wave_time;
            prev_lwa = fv->wave_amplitude;
            prev_zcd = fv->zero_cross_dist;
            fx.commit_pulse(false);
        }
    }
}

TEST_CASE("property: similarity stays within [-1, 1]") {
    Rng rng(303);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 2 + rng.index(40);
        double period = 2.0 + rng.uniform(0.0, 40.0);
        std::vector<double> w(n);
        for (auto& v : w) v = rng.gaussian() * std::pow(10.0, rng.uniform(-3.0, 3.0));
        double s = shape_similarity(w, period);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("property: sub-threshold square waves never move the comparator") {
    Rng rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        double hy = rng.uniform(0.3, 0.5);
        double amp = hy * rng.uniform(0.05, 0.98);
        int cz = rng.index(2) ? 1 : 0;
        int cz0 = cz;
        for (int i = 0; i < 50; ++i) {
            double x = (i % 2 == 0 ? amp : -amp);
            cz = hysteresis_compare(x, cz, hy);
            CHECK(cz == cz0);
        }
    }
}

TEST_CASE("feature vector dimensions follow the extended flag") {
    FeatureVector fv;
    fv.extended = true;
    CHECK(fv.dim() == 9);
    CHECK(fv.values().size() == 9);
    fv.extended = false;
    CHECK(fv.dim() == 7);
    CHECK(fv.values().size() == 7);
}
