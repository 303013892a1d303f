#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ripple {

// Error categories; the numeric values double as CLI exit codes and as the
// status codes of the C API.
enum class ErrorCode : int {
    invalid_argument = 2,
    non_convergence = 3,
    io = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail_invalid(const std::string& what) {
    throw Error(ErrorCode::invalid_argument, what);
}
[[noreturn]] inline void fail_io(const std::string& what) {
    throw Error(ErrorCode::io, what);
}

// Construction parameters of a brushed DC motor. Only the pole and bar counts
// drive the estimator (through the pulses-per-revolution count); the electrical
// constants shape the simulated DC operating point.
struct MotorSpec {
    int two_p = 2;               // number of poles (2p), even
    int commutator_bars = 3;     // k
    double nominal_voltage = 12.0;      // V
    double no_load_current = 0.53;      // A
    double armature_resistance = 1.8;   // ohm
    double emf_constant = 0.0178;       // V per r/min

    void validate() const;
    int pulses_per_revolution() const;
};

// Pulses of current per shaft revolution: 2p*k / gcd(2p, k).
int pulses_per_revolution(int two_p, int commutator_bars);

// Morphology of one commutation pulse: a slow rise, a steep fall past the
// peak, then a gentle fall to the trough. Fractions are of one ripple period
// and must sum to 1.
struct RippleShape {
    double rise_fraction = 0.55;
    double steep_fall_fraction = 0.10;
    double slight_fall_fraction = 0.35;
    double ripple_amplitude_ratio = 0.08;  // ripple peak-to-peak over DC level

    void validate() const;
};

enum class ProfileKind { constant, linear_ramp, step };

struct SpeedSegment {
    double duration_s = 1.0;
    ProfileKind kind = ProfileKind::constant;
    double start_rpm = 0.0;
    double end_rpm = 0.0;  // ignored for constant; target after mid-segment for step
};

struct SpeedProfile {
    std::vector<SpeedSegment> segments;

    void validate() const;
    double total_duration() const;
    double rpm_at(double t) const;
    double max_rpm() const;
    double min_rpm() const;

    static SpeedProfile constant(double rpm, double duration_s);
    static SpeedProfile ramp(double start_rpm, double end_rpm, double duration_s);
    // Speed jumps from start_rpm to end_rpm at duration_s/2.
    static SpeedProfile step(double start_rpm, double end_rpm, double duration_s);
};

// Scripted waveform corruptions. False pulses add an extra ripple-shaped
// excursion near the scripted time; ghost pulses attenuate the true excursion
// there. Neither changes the ground truth.
struct CorruptionScript {
    std::vector<double> false_pulse_times;  // seconds
    std::vector<double> ghost_pulse_times;  // seconds
    double noise_rms = -1.0;       // amps; < 0 selects ~20 dB in-band SNR
    double noise_bandwidth = 0.0;  // Hz; <= 0 selects fs/4

    void validate(double total_duration) const;
};

struct SampleStream {
    double fs = 0.0;
    std::vector<double> current;  // amps

    std::size_t size() const { return current.size(); }
};

struct GroundTruth {
    std::vector<double> speed_rpm;      // per sample
    std::vector<double> position_rad;   // per sample, unwrapped
    std::vector<std::int64_t> pulse_indices;  // strictly increasing
};

}  // namespace ripple
