#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/detector.hpp"
#include "core/sim.hpp"
#include "core/types.hpp"

using namespace ripple;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// run a pulse train through the detector: pulse_at holds sample indices
struct Driven {
    std::vector<std::pair<std::int64_t, double>> speeds;  // (sample, rpm)
    double final_position = 0.0;
};

Driven drive(DetectorState& st, std::int64_t n, const std::vector<std::int64_t>& pulse_at) {
    Driven out;
    std::size_t next = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        bool pulse = next < pulse_at.size() && pulse_at[next] == i;
        if (pulse) ++next;
        if (auto rpm = st.update_speed(pulse)) out.speeds.emplace_back(i, *rpm);
        out.final_position = st.update_position(pulse);
    }
    return out;
}

}  // namespace

TEST_CASE("speed follows the inverse mean inter-pulse distance") {
    DetectorConfig cfg{6, 1};
    DetectorState st(cfg, 5000.0);
    auto out = drive(st, 300, {50, 150});  // one full interval of 100 samples
    REQUIRE(out.speeds.size() == 1);
    CHECK(out.speeds[0].first == 150);
    CHECK(out.speeds[0].second == doctest::Approx(500.0));  // 5000/100 * 60/6
}

TEST_CASE("speed averages the last num_pulse_mean distances") {
    DetectorConfig cfg{10, 2};
    DetectorState st(cfg, 5000.0);
    auto out = drive(st, 600, {100, 225, 350});  // two intervals of 125
    REQUIRE(out.speeds.size() == 1);
    // 5000 * 2 / 250 * 60 / 10
    CHECK(out.speeds[0].second == doctest::Approx(240.0));
}

TEST_CASE("no pulse means no emission and a growing distance") {
    DetectorConfig cfg{6, 1};
    DetectorState st(cfg, 5000.0);
    for (int i = 0; i < 10; ++i) {
        CHECK_FALSE(st.update_speed(false).has_value());
        CHECK(st.distance_since_pulse() == i + 1);
    }
}

TEST_CASE("first speed needs num_pulse_mean completed intervals") {
    DetectorConfig cfg{6, 3};
    DetectorState st(cfg, 5000.0);
    auto out = drive(st, 500, {10, 110, 210, 310, 410});
    // intervals complete at 110, 210, 310, 410 -> first emission at the 4th pulse
    REQUIRE(out.speeds.size() == 2);
    CHECK(out.speeds[0].first == 310);
}

TEST_CASE("position counts pulses in exact angular steps") {
    DetectorConfig cfg{6, 4};
    DetectorState st(cfg, 5000.0);
    std::vector<std::int64_t> pulses;
    for (int k = 0; k < 6; ++k) pulses.push_back(10 + 20 * k);
    auto out = drive(st, 200, pulses);
    CHECK(out.final_position == doctest::Approx(kTwoPi));

    DetectorState st2(cfg, 5000.0);
    auto out2 = drive(st2, 100, {});
    CHECK(out2.final_position == 0.0);

    DetectorConfig cfg10{10, 4};
    DetectorState st3(cfg10, 5000.0);
    std::vector<std::int64_t> p15;
    for (int k = 0; k < 15; ++k) p15.push_back(5 + 10 * k);
    auto out3 = drive(st3, 300, p15);
    CHECK(out3.final_position == doctest::Approx(3.0 * 3.14159265358979323846));
}

TEST_CASE("position is a nondecreasing step function of step 2pi/ppr") {
    DetectorConfig cfg{6, 4};
    DetectorState st(cfg, 5000.0);
    double prev = 0.0;
    for (std::int64_t i = 0; i < 400; ++i) {
        bool pulse = i % 37 == 5;
        st.update_speed(pulse);
        double pos = st.update_position(pulse);
        double diff = pos - prev;
        CHECK(diff >= 0.0);
        if (diff > 0.0) CHECK(diff == doctest::Approx(kTwoPi / 6));
        prev = pos;
    }
}

TEST_CASE("doubling every distance halves the speed exactly") {
    DetectorConfig cfg{6, 4};
    DetectorState a(cfg, 5000.0), b(cfg, 5000.0);
    std::vector<std::int64_t> pa, pb;
    std::int64_t ta = 7, tb = 7;
    for (int k = 0; k < 12; ++k) {
        pa.push_back(ta);
        pb.push_back(tb);
        ta += 40 + 3 * k;
        tb += 2 * (40 + 3 * k);
    }
    auto ra = drive(a, 2000, pa);
    auto rb = drive(b, 4000, pb);
    REQUIRE(ra.speeds.size() == rb.speeds.size());
    for (std::size_t i = 0; i < ra.speeds.size(); ++i)
        CHECK(ra.speeds[i].second == doctest::Approx(2.0 * rb.speeds[i].second).epsilon(1e-12));
}

TEST_CASE("speed emissions happen exactly on detected pulses") {
    DetectorConfig cfg{6, 2};
    DetectorState st(cfg, 5000.0);
    std::vector<std::int64_t> pulses{30, 70, 120, 180, 240};
    std::size_t next = 0;
    for (std::int64_t i = 0; i < 300; ++i) {
        bool pulse = next < pulses.size() && pulses[next] == i;
        if (pulse) ++next;
        auto speed = st.update_speed(pulse);
        if (speed) CHECK(pulse);
        st.update_position(pulse);
    }
}

TEST_CASE("a bias-negative model never pulses through the pipeline") {
    MotorSpec motor{2, 3, 12.0, 0.53, 1.8, 0.0178};
    auto sim = generate(motor, RippleShape{}, SpeedProfile::constant(2000.0, 0.5),
                        CorruptionScript{}, 5000.0, 9);

    SvmModel never;
    never.bias = -1.0;

    PipelineConfig cfg;
    cfg.frontend.fc_low = 100.0;
    cfg.frontend.fc_up = 1200.0;
    cfg.features.initial_period = 25.0;
    cfg.detector.pulse_revolution = 6;

    Pipeline p(never, cfg, sim.stream.fs);
    auto records = p.run(sim.stream.current);
    CHECK(records.size() == sim.stream.size() - static_cast<std::size_t>(p.lag()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].sample_index == static_cast<std::int64_t>(i));
        CHECK_FALSE(records[i].pulse);
        CHECK_FALSE(records[i].has_speed);
        CHECK(records[i].position_rad == 0.0);
    }
}

TEST_CASE("pipeline rejects a model of mismatched dimension") {
    SvmModel model;
    model.support_vectors = {{1.0, 2.0}};  // 2-dimensional
    model.coeff = {0.5};

    PipelineConfig cfg;
    cfg.features.extended = true;  // expects 9 features
    CHECK_THROWS_AS(Pipeline(model, cfg, 5000.0), Error);
}

TEST_CASE("detector config is validated") {
    DetectorConfig zero_ppr{0, 4};
    DetectorConfig zero_mean{6, 0};
    DetectorConfig good{6, 4};
    CHECK_THROWS_AS(zero_ppr.validate(), Error);
    CHECK_THROWS_AS(zero_mean.validate(), Error);
    CHECK_NOTHROW(good.validate());
}
