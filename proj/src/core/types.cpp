#include "core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ripple {

void MotorSpec::validate() const {
    if (two_p < 2 || two_p % 2 != 0) fail_invalid("two_p must be even and >= 2");
    if (commutator_bars < 3) fail_invalid("commutator_bars must be >= 3");
    if (nominal_voltage <= 0.0) fail_invalid("nominal_voltage must be positive");
    if (no_load_current <= 0.0) fail_invalid("no_load_current must be positive");
    if (armature_resistance <= 0.0) fail_invalid("armature_resistance must be positive");
    if (emf_constant < 0.0) fail_invalid("emf_constant must be nonnegative");
}

int MotorSpec::pulses_per_revolution() const {
    return ripple::pulses_per_revolution(two_p, commutator_bars);
}

int pulses_per_revolution(int two_p, int commutator_bars) {
    if (two_p < 2 || two_p % 2 != 0) fail_invalid("two_p must be even and >= 2");
    if (commutator_bars < 3) fail_invalid("commutator_bars must be >= 3");
    return two_p * commutator_bars / std::gcd(two_p, commutator_bars);
}

void RippleShape::validate() const {
    if (rise_fraction <= 0.0 || steep_fall_fraction <= 0.0 || slight_fall_fraction <= 0.0)
        fail_invalid("ripple shape fractions must be positive");
    double sum = rise_fraction + steep_fall_fraction + slight_fall_fraction;
    if (std::abs(sum - 1.0) > 1e-9) fail_invalid("ripple shape fractions must sum to 1");
    if (ripple_amplitude_ratio <= 0.0) fail_invalid("ripple_amplitude_ratio must be positive");
}

void SpeedProfile::validate() const {
    if (segments.empty()) fail_invalid("speed profile has no segments");
    for (const auto& s : segments) {
        if (s.duration_s <= 0.0) fail_invalid("segment duration must be positive");
        if (s.start_rpm <= 0.0) fail_invalid("segment speeds must be positive");
        if (s.kind != ProfileKind::constant && s.end_rpm <= 0.0)
            fail_invalid("segment speeds must be positive");
    }
}

double SpeedProfile::total_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration_s;
    return t;
}

double SpeedProfile::rpm_at(double t) const {
    double t0 = 0.0;
    for (const auto& s : segments) {
        if (t < t0 + s.duration_s || &s == &segments.back()) {
            double local = std::clamp(t - t0, 0.0, s.duration_s);
            switch (s.kind) {
                case ProfileKind::constant:
                    return s.start_rpm;
                case ProfileKind::linear_ramp:
                    return s.start_rpm + (s.end_rpm - s.start_rpm) * (local / s.duration_s);
                case ProfileKind::step:
                    return local < 0.5 * s.duration_s ? s.start_rpm : s.end_rpm;
            }
        }
        t0 += s.duration_s;
    }
    return segments.back().kind == ProfileKind::constant ? segments.back().start_rpm
                                                         : segments.back().end_rpm;
}

double SpeedProfile::max_rpm() const {
    double m = 0.0;
    for (const auto& s : segments) {
        m = std::max(m, s.start_rpm);
        if (s.kind != ProfileKind::constant) m = std::max(m, s.end_rpm);
    }
    return m;
}

double SpeedProfile::min_rpm() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : segments) {
        m = std::min(m, s.start_rpm);
        if (s.kind != ProfileKind::constant) m = std::min(m, s.end_rpm);
    }
    return m;
}

SpeedProfile SpeedProfile::constant(double rpm, double duration_s) {
    return SpeedProfile{{SpeedSegment{duration_s, ProfileKind::constant, rpm, rpm}}};
}

SpeedProfile SpeedProfile::ramp(double start_rpm, double end_rpm, double duration_s) {
    return SpeedProfile{{SpeedSegment{duration_s, ProfileKind::linear_ramp, start_rpm, end_rpm}}};
}

SpeedProfile SpeedProfile::step(double start_rpm, double end_rpm, double duration_s) {
    return SpeedProfile{{SpeedSegment{duration_s, ProfileKind::step, start_rpm, end_rpm}}};
}

void CorruptionScript::validate(double total_duration) const {
    for (double t : false_pulse_times)
        if (t < 0.0 || t > total_duration) fail_invalid("false pulse time outside the run");
    for (double t : ghost_pulse_times)
        if (t < 0.0 || t > total_duration) fail_invalid("ghost pulse time outside the run");
}

}  // namespace ripple
