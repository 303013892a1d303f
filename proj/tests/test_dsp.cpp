#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/dsp.hpp"
#include "core/rng.hpp"
#include "core/types.hpp"

using namespace ripple;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

FrontendConfig cfg5k() {
    FrontendConfig c;
    c.fc_low = 100.0;
    c.fc_up = 1200.0;
    c.fs = 5000.0;
    return c;
}

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(kTwoPi * f * static_cast<double>(i) / fs);
    return x;
}

}  // namespace

TEST_CASE("bandpass passes the mid-band and rejects DC and far tones") {
    auto cfg = cfg5k();
    double mid = std::sqrt(cfg.fc_low * cfg.fc_up);
    std::size_t n = 8000;

    auto y_mid = bandpass(tone(mid, cfg.fs, n), cfg);
    CHECK(tone_response(y_mid, cfg.fs, mid) >= 0.9);

    std::vector<double> dc(n, 1.0);
    auto y_dc = bandpass(dc, cfg);
    double dc_level = std::abs(y_dc[n / 2]);  // steady state
    CHECK(dc_level <= 0.01);  // >= 40 dB down

    double f_far = 2.0 * cfg.fc_up;
    auto y_far = bandpass(tone(f_far, cfg.fs, n), cfg);
    CHECK(tone_response(y_far, cfg.fs, f_far) <= 0.1);  // >= 20 dB down
}

TEST_CASE("bandpass group delay is reported and outputs stay aligned") {
    auto cfg = cfg5k();
    FirBandpass fir(cfg);
    CHECK(fir.group_delay() == (cfg.taps - 1) / 2);

    // an aligned impulse response peaks at the impulse position
    std::vector<double> x(600, 0.0);
    x[300] = 1.0;
    auto y = bandpass(x, cfg);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (std::abs(y[i]) > std::abs(y[peak])) peak = i;
    CHECK(peak == 300);
}

TEST_CASE("bandpass is linear") {
    auto cfg = cfg5k();
    Rng rng(5);
    std::size_t n = 2000;
    std::vector<double> a(n), b(n), sum(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.gaussian();
        b[i] = rng.gaussian();
        sum[i] = a[i] + b[i];
    }
    auto ya = bandpass(a, cfg), yb = bandpass(b, cfg), ys = bandpass(sum, cfg);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(ys[i] - ya[i] - yb[i]) <= 1e-9);
}

TEST_CASE("no output depends on samples beyond the lookahead budget") {
    auto cfg = cfg5k();
    Rng rng(17);
    std::size_t n = 1200;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.gaussian();

    FirBandpass full(cfg);
    std::vector<double> y_full;
    for (double v : x)
        if (auto y = full.push(v)) y_full.push_back(*y);

    for (std::size_t j : {std::size_t{100}, std::size_t{500}, std::size_t{900}}) {
        FirBandpass part(cfg);
        std::vector<double> y_part;
        for (std::size_t i = 0; i <= j + static_cast<std::size_t>(cfg.delay); ++i)
            if (auto y = part.push(x[i])) y_part.push_back(*y);
        REQUIRE(y_part.size() > j);
        CHECK(y_part[j] == y_full[j]);
    }
}

TEST_CASE("bandpass rejects invalid cutoffs") {
    auto cfg = cfg5k();
    cfg.fc_low = 1300.0;  // above fc_up
    CHECK_THROWS_AS(FirBandpass{cfg}, Error);
    auto cfg2 = cfg5k();
    cfg2.fc_up = 2600.0;  // above Nyquist
    CHECK_THROWS_AS(FirBandpass{cfg2}, Error);
    auto cfg3 = cfg5k();
    cfg3.delay = 10;  // smaller than the FIR group delay
    CHECK_THROWS_AS(FirBandpass{cfg3}, Error);
}

TEST_CASE("filter bank isolates the band holding the tracked period") {
    auto cfg = cfg5k();
    cfg.filter_bank_enabled = true;
    FilterBank bank(cfg);

    // bands split [100, 1200] geometrically in 4; band 1 spans ~186..347 Hz
    double f_ripple = 255.0;
    double period = cfg.fs / f_ripple;
    int band = bank.band_for(period);
    CHECK(band == 1);

    double f_interferer = 900.0;  // band 3 territory
    std::size_t n = 20000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / cfg.fs;
        x[i] = std::sin(kTwoPi * f_ripple * t) + std::sin(kTwoPi * f_interferer * t);
    }
    auto y = filter_bank(x, cfg, period);
    double ripple_gain = tone_response(y, cfg.fs, f_ripple);
    double interferer_gain = tone_response(y, cfg.fs, f_interferer);
    CHECK(ripple_gain >= std::pow(10.0, -1.0 / 20.0));       // <= 1 dB loss
    CHECK(interferer_gain <= std::pow(10.0, -15.0 / 20.0));  // >= 15 dB down
}

TEST_CASE("filter bank passes through when disabled or untracked") {
    auto cfg = cfg5k();
    cfg.filter_bank_enabled = false;
    auto x = tone(300.0, cfg.fs, 500);
    auto y = filter_bank(x, cfg, 20.0);
    CHECK(x == y);

    cfg.filter_bank_enabled = true;
    auto y2 = filter_bank(x, cfg, 0.0);  // no period estimate yet
    CHECK(x == y2);
}

TEST_CASE("normalizer removes mean and scale") {
    std::size_t n = 6000;
    std::vector<double> c(n, 3.7);
    auto y = normalize(c, 64.0);
    for (std::size_t i = 1; i < n; ++i) CHECK(y[i] == 0.0);

    Rng rng(23);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.gaussian();
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = 10.0 * x[i] + 4.2;
    auto y1 = normalize(x, 256.0);
    auto y2 = normalize(scaled, 256.0);
    for (std::size_t i = 2000; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-9);
}

TEST_CASE("normalizer tracks a unit-variance stream closely") {
    std::size_t n = 120000;
    Rng rng(31);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.gaussian();
    auto y = normalize(x, 30000.0);
    double max_dev = 0.0;
    for (std::size_t i = 60000; i < n; ++i) max_dev = std::max(max_dev, std::abs(y[i] - x[i]));
    CHECK(max_dev <= 0.05);
}

TEST_CASE("normalized clean ripple stays near zero mean, unit deviation") {
    // synthetic periodic signal with slow drift
    std::size_t n = 40000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i);
        x[i] = 2.0 + 0.0001 * t + 0.35 * std::sin(kTwoPi * t / 50.0);
    }
    auto y = normalize(x, 200.0);  // four periods
    double mean = 0.0, var = 0.0;
    std::size_t start = 2000;
    for (std::size_t i = start; i < n; ++i) mean += y[i];
    mean /= static_cast<double>(n - start);
    for (std::size_t i = start; i < n; ++i) var += (y[i] - mean) * (y[i] - mean);
    var /= static_cast<double>(n - start);
    CHECK(std::abs(mean) <= 0.1);
    CHECK(std::sqrt(var) >= 0.7);
    CHECK(std::sqrt(var) <= 1.3);
}

TEST_CASE("dominant frequency estimation resolves a pure tone") {
    double f = 137.0, fs = 5000.0;
    auto x = tone(f, fs, 10000);
    CHECK(dominant_frequency(x, fs, 50.0, 400.0) == doctest::Approx(f).epsilon(0.005));
}
