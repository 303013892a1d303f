#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "core/dsp.hpp"
#include "core/sim.hpp"
#include "core/types.hpp"

using namespace ripple;

namespace {

MotorSpec emg30() { return MotorSpec{2, 3, 12.0, 0.53, 1.8, 0.0178}; }
MotorSpec m719re385() { return MotorSpec{2, 5, 12.0, 0.25, 1.5, 0.00101}; }

CorruptionScript clean() {
    CorruptionScript c;
    c.noise_rms = 0.0;
    return c;
}

}  // namespace

TEST_CASE("pulses per revolution from motor construction") {
    CHECK(emg30().pulses_per_revolution() == 6);
    CHECK(m719re385().pulses_per_revolution() == 10);
    CHECK(pulses_per_revolution(4, 6) == 12);
    CHECK_THROWS_AS(pulses_per_revolution(3, 3), Error);
    CHECK_THROWS_AS(pulses_per_revolution(2, 2), Error);
}

TEST_CASE("constant speed run produces the expected pulse count") {
    auto sim = generate(emg30(), RippleShape{}, SpeedProfile::constant(500.0, 1.0), clean(),
                        5000.0, 42);
    CHECK(sim.stream.size() == 5000);
    CHECK(sim.truth.speed_rpm.size() == 5000);
    // 500/60 * 6 pulses/s over 1 s
    CHECK(sim.truth.pulse_indices.size() == 50);
    CHECK(std::is_sorted(sim.truth.pulse_indices.begin(), sim.truth.pulse_indices.end()));
}

TEST_CASE("clean waveform has exactly one local maximum per ripple period") {
    auto sim = generate(emg30(), RippleShape{}, SpeedProfile::constant(1000.0, 1.0), clean(),
                        5000.0, 7);
    const auto& x = sim.stream.current;
    const auto& pulses = sim.truth.pulse_indices;
    // skip the first few periods while the DC lag settles
    for (std::size_t k = 10; k + 1 < pulses.size(); ++k) {
        int maxima = 0;
        for (std::int64_t i = pulses[k] + 1; i < pulses[k + 1]; ++i) {
            auto u = static_cast<std::size_t>(i);
            if (x[u] > x[u - 1] && x[u] > x[u + 1]) ++maxima;
        }
        // the sampled peak may sit on either side of the interval boundary
        CHECK(maxima <= 1);
    }
    // and across the settled region the pulse cadence carries one max each
    std::size_t total_maxima = 0;
    for (std::size_t i = static_cast<std::size_t>(pulses[10]);
         i < static_cast<std::size_t>(pulses[pulses.size() - 1]); ++i)
        if (x[i] > x[i - 1] && x[i] > x[i + 1]) ++total_maxima;
    CHECK(total_maxima == pulses.size() - 11);
}

TEST_CASE("position is locked to the pulse count") {
    auto sim = generate(emg30(), RippleShape{}, SpeedProfile::constant(1500.0, 0.8), clean(),
                        5000.0, 3);
    int ppr = emg30().pulses_per_revolution();
    // a pulse sample lies within one sample of the exact crossing, so its
    // position reads between the exact multiple and one phase step past it
    double step_rad = 2.0 * 3.14159265358979323846 / ppr;
    double max_over = step_rad * (1500.0 / 60.0 * ppr / 5000.0) * 1.01;
    for (std::size_t k = 0; k < sim.truth.pulse_indices.size(); ++k) {
        auto i = static_cast<std::size_t>(sim.truth.pulse_indices[k]);
        double expected = step_rad * static_cast<double>(k + 1);
        CHECK(sim.truth.position_rad[i] >= expected - 1e-6);
        CHECK(sim.truth.position_rad[i] <= expected + max_over);
    }
    for (std::size_t i = 1; i < sim.truth.position_rad.size(); ++i)
        CHECK(sim.truth.position_rad[i] >= sim.truth.position_rad[i - 1]);
}

TEST_CASE("pulse count is conserved under any corruption script") {
    auto base = generate(emg30(), RippleShape{}, SpeedProfile::constant(2000.0, 1.0),
                         CorruptionScript{}, 5000.0, 11);
    CorruptionScript heavy;
    heavy.false_pulse_times = {0.2, 0.35, 0.61, 0.8};
    heavy.ghost_pulse_times = {0.25, 0.5, 0.75};
    auto corrupted = generate(emg30(), RippleShape{}, SpeedProfile::constant(2000.0, 1.0), heavy,
                              5000.0, 11);
    CHECK(base.truth.pulse_indices == corrupted.truth.pulse_indices);
    // waveform did change
    CHECK(base.stream.current != corrupted.stream.current);
}

TEST_CASE("ghost corruption attenuates the excursion at the nearest pulse") {
    CorruptionScript ghost;
    ghost.noise_rms = 0.0;
    ghost.ghost_pulse_times = {0.5};
    auto clean_sim = generate(emg30(), RippleShape{}, SpeedProfile::constant(1200.0, 1.0),
                              clean(), 5000.0, 5);
    auto ghost_sim = generate(emg30(), RippleShape{}, SpeedProfile::constant(1200.0, 1.0), ghost,
                              5000.0, 5);
    auto at = static_cast<std::size_t>(0.5 * 5000);
    // nearest pulse to 0.5 s
    std::int64_t nearest = clean_sim.truth.pulse_indices.front();
    for (auto p : clean_sim.truth.pulse_indices)
        if (std::llabs(p - static_cast<std::int64_t>(at)) <
            std::llabs(nearest - static_cast<std::int64_t>(at)))
            nearest = p;
    auto n = static_cast<std::size_t>(nearest);
    double clean_exc = clean_sim.stream.current[n] - clean_sim.stream.current[n + 8];
    double ghost_exc = ghost_sim.stream.current[n] - ghost_sim.stream.current[n + 8];
    CHECK(std::abs(ghost_exc) < 0.25 * std::abs(clean_exc));
}

TEST_CASE("identical seeds reproduce bit-identical streams") {
    CorruptionScript noisy;  // default auto noise
    auto a = generate(emg30(), RippleShape{}, SpeedProfile::ramp(900.0, 2100.0, 0.7), noisy,
                      5000.0, 99);
    auto b = generate(emg30(), RippleShape{}, SpeedProfile::ramp(900.0, 2100.0, 0.7), noisy,
                      5000.0, 99);
    REQUIRE(a.stream.size() == b.stream.size());
    CHECK(std::equal(a.stream.current.begin(), a.stream.current.end(), b.stream.current.begin()));
    CHECK(a.truth.pulse_indices == b.truth.pulse_indices);

    auto c = generate(emg30(), RippleShape{}, SpeedProfile::ramp(900.0, 2100.0, 0.7), noisy,
                      5000.0, 100);
    CHECK(a.stream.current != c.stream.current);
}

TEST_CASE("dominant spectral line sits at the ripple frequency") {
    double rpm = 3000.0;
    auto sim = generate(emg30(), RippleShape{}, SpeedProfile::constant(rpm, 2.0), clean(),
                        5000.0, 21);
    double f_ripple = rpm / 60.0 * emg30().pulses_per_revolution();
    // analyze the settled tail
    std::span<const double> tail(sim.stream.current.data() + 5000, 5000);
    double f = dominant_frequency(tail, 5000.0, 0.3 * f_ripple, 3.0 * f_ripple);
    CHECK(f == doctest::Approx(f_ripple).epsilon(0.05));
}

TEST_CASE("speed profiles evaluate as specified") {
    auto p = SpeedProfile::step(2000.0, 4000.0, 2.0);
    CHECK(p.rpm_at(0.5) == 2000.0);
    CHECK(p.rpm_at(1.5) == 4000.0);
    auto r = SpeedProfile::ramp(1000.0, 2000.0, 2.0);
    CHECK(r.rpm_at(1.0) == doctest::Approx(1500.0));
    CHECK(r.max_rpm() == 2000.0);
}

TEST_CASE("generation rejects invalid configurations") {
    // aliasing guard: 6000 r/min needs fs >= 10 * 600 Hz
    CHECK_THROWS_AS(generate(emg30(), RippleShape{}, SpeedProfile::constant(6000.0, 0.5), clean(),
                             50.0, 1),
                    Error);
    CorruptionScript outside;
    outside.false_pulse_times = {2.5};
    CHECK_THROWS_AS(generate(emg30(), RippleShape{}, SpeedProfile::constant(500.0, 1.0), outside,
                             5000.0, 1),
                    Error);
    RippleShape bad;
    bad.rise_fraction = 0.7;  // fractions no longer sum to 1
    CHECK_THROWS_AS(generate(emg30(), bad, SpeedProfile::constant(500.0, 1.0), clean(), 5000.0, 1),
                    Error);
}
