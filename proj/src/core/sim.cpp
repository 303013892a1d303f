#include "core/sim.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace ripple {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Steepness of the exponential section of the fall.
constexpr double kFallLambda = 5.0;
// Level where the steep fall hands over to the slight fall, in peak-to-peak
// units relative to the -0.5..+0.5 waveform.
constexpr double kMidLevel = -0.35;

struct Biquad {
    double b0, b1, b2, a1, a2;
    double z1 = 0.0, z2 = 0.0;

    double step(double x) {
        double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        return y;
    }
};

Biquad butterworth_lowpass(double fc, double fs) {
    double w0 = kTwoPi * fc / fs;
    double q = 0.70710678118654752440;
    double alpha = std::sin(w0) / (2.0 * q);
    double cw = std::cos(w0);
    double a0 = 1.0 + alpha;
    return Biquad{(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0,
                  -2.0 * cw / a0, (1.0 - alpha) / a0};
}

std::int64_t nearest_pulse(const std::vector<std::int64_t>& pulses, std::int64_t idx) {
    auto it = std::lower_bound(pulses.begin(), pulses.end(), idx);
    if (it == pulses.end()) return pulses.back();
    if (it == pulses.begin()) return pulses.front();
    std::int64_t hi = *it, lo = *(it - 1);
    return (hi - idx) < (idx - lo) ? hi : lo;
}

}  // namespace

double ripple_waveform(double u, const RippleShape& shape) {
    double sf = shape.steep_fall_fraction;
    double gf = shape.slight_fall_fraction;
    if (u < sf) {
        double s = u / sf;
        double decay = (std::exp(-kFallLambda * s) - std::exp(-kFallLambda)) /
                       (1.0 - std::exp(-kFallLambda));
        return kMidLevel + (0.5 - kMidLevel) * decay;
    }
    if (u < sf + gf) {
        double s = (u - sf) / gf;
        return kMidLevel + (-0.5 - kMidLevel) * s;
    }
    double s = (u - sf - gf) / shape.rise_fraction;
    return -0.5 + s;
}

SimResult generate(const MotorSpec& spec, const RippleShape& shape, const SpeedProfile& profile,
                   const CorruptionScript& corruption, double fs, std::uint64_t seed) {
    spec.validate();
    shape.validate();
    profile.validate();
    if (fs <= 0.0) fail_invalid("fs must be positive");
    double duration = profile.total_duration();
    corruption.validate(duration);

    int ppr = spec.pulses_per_revolution();
    double max_ripple_hz = profile.max_rpm() / 60.0 * ppr;
    if (fs < 10.0 * max_ripple_hz)
        fail_invalid("fs too low for the requested speeds: need at least 10x the ripple frequency (" +
                     std::to_string(10.0 * max_ripple_hz) + " Hz)");

    auto n = static_cast<std::size_t>(std::ceil(duration * fs));
    double dt = 1.0 / fs;
    double lag_coeff = 1.0 - std::exp(-dt / 0.030);  // 30 ms DC time constant

    SimResult out;
    out.stream.fs = fs;
    out.stream.current.resize(n);
    out.truth.speed_rpm.resize(n);
    out.truth.position_rad.resize(n);

    std::vector<double> ac(n);
    std::vector<double> phase(n);  // ripple phase in cycles

    auto steady_current = [&](double rpm) {
        double electrical = (spec.nominal_voltage - spec.emf_constant * rpm) / spec.armature_resistance;
        return std::max(spec.no_load_current, electrical);
    };

    double phi = 0.0;
    double dc = steady_current(profile.rpm_at(0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) * dt;
        double rpm = profile.rpm_at(t);
        double prev_phi = phi;
        phi += rpm / 60.0 * ppr * dt;
        // the epsilon absorbs accumulated rounding when a crossing lands
        // exactly on a sample boundary
        if (std::floor(phi + 1e-9) > std::floor(prev_phi + 1e-9))
            out.truth.pulse_indices.push_back(static_cast<std::int64_t>(i));
        dc += (steady_current(rpm) - dc) * lag_coeff;

        phase[i] = phi;
        out.truth.speed_rpm[i] = rpm;
        out.truth.position_rad[i] = kTwoPi * phi / ppr;
        ac[i] = shape.ripple_amplitude_ratio * dc * ripple_waveform(phi - std::floor(phi), shape);
        out.stream.current[i] = dc;  // ripple and noise added below
    }

    double ac_mean = 0.0;
    for (double v : ac) ac_mean += v;
    ac_mean /= static_cast<double>(n);
    double ac_var = 0.0;
    for (double v : ac) ac_var += (v - ac_mean) * (v - ac_mean);
    double ac_rms = std::sqrt(ac_var / static_cast<double>(n));

    Rng rng(seed);

    // Ghost pulses: attenuate the excursion around the nearest true pulse deep
    // enough that the excursion drowns in the noise floor.
    for (double t : corruption.ghost_pulse_times) {
        if (out.truth.pulse_indices.empty()) break;
        auto center = nearest_pulse(out.truth.pulse_indices, static_cast<std::int64_t>(t * fs));
        double rpm = out.truth.speed_rpm[static_cast<std::size_t>(center)];
        auto half = static_cast<std::int64_t>(std::round(fs / (rpm / 60.0 * ppr)));
        double keep = rng.uniform(0.02, 0.05);
        // flat bottom across the masked excursion, raised-cosine shoulders that
        // restore the neighbours' arming troughs by ~0.55 period and their
        // peaks fully by 0.8 period
        for (std::int64_t j = std::max<std::int64_t>(0, center - half);
             j < std::min<std::int64_t>(static_cast<std::int64_t>(n), center + half + 1); ++j) {
            double u = std::abs(static_cast<double>(j - center) / static_cast<double>(half));
            double factor;
            if (u <= 0.35)
                factor = keep;
            else if (u >= 0.8)
                factor = 1.0;
            else
                factor = keep + (1.0 - keep) * 0.5 *
                                    (1.0 - std::cos(3.14159265358979323846 * (u - 0.35) / 0.45));
            ac[static_cast<std::size_t>(j)] *= factor;
        }
    }

    // False pulses: add one compressed ripple-shaped excursion in the quiet
    // stretch after the true peak nearest the scripted time, where it reads as
    // a clean double pulse (distinct extra maximum, separate comparator
    // crossing).
    for (double t : corruption.false_pulse_times) {
        auto want = static_cast<std::int64_t>(t * fs);
        std::int64_t peak_at = -1;
        for (std::int64_t off = 0; off < static_cast<std::int64_t>(n); ++off) {
            for (std::int64_t cand : {want - off, want + off}) {
                if (cand < 1 || cand >= static_cast<std::int64_t>(n)) continue;
                double f0 = phase[static_cast<std::size_t>(cand - 1)];
                double f1 = phase[static_cast<std::size_t>(cand)];
                if (std::floor(f0 - 0.3) != std::floor(f1 - 0.3)) {
                    peak_at = cand;
                    break;
                }
            }
            if (peak_at >= 0) break;
        }
        if (peak_at < 0) continue;
        double rpm = out.truth.speed_rpm[static_cast<std::size_t>(peak_at)];
        double width = 0.30 * fs / (rpm / 60.0 * ppr);
        double pp = shape.ripple_amplitude_ratio * out.stream.current[static_cast<std::size_t>(peak_at)];
        // the excursion tops out at 70..100% of a true peak, rising from the
        // local waveform level
        double target_peak = rng.uniform(0.7, 1.0) * 0.5 * pp;
        double base = pp * ripple_waveform(0.3, shape);
        double scale = std::max(0.0, target_peak - base);
        // the excursion starts at the trough phase and peaks rise_fraction into
        // its (compressed) span
        auto start = static_cast<std::int64_t>(std::round(peak_at - shape.rise_fraction * width));
        for (std::int64_t j = std::max<std::int64_t>(0, start);
             j < std::min<std::int64_t>(static_cast<std::int64_t>(n),
                                        start + static_cast<std::int64_t>(width) + 1); ++j) {
            double s = static_cast<double>(j - start) / width;
            if (s < 0.0 || s >= 1.0) continue;
            double trough = shape.steep_fall_fraction + shape.slight_fall_fraction;
            double u = trough + s;
            u -= std::floor(u);
            ac[static_cast<std::size_t>(j)] += scale * (ripple_waveform(u, shape) + 0.5);
        }
    }

    // Band-limited Gaussian noise, scaled to the requested RMS (or to roughly
    // 20 dB below the ripple when unset).
    double bw = corruption.noise_bandwidth > 0.0 ? std::min(corruption.noise_bandwidth, 0.45 * fs)
                                                 : fs / 4.0;
    double target_rms = corruption.noise_rms >= 0.0 ? corruption.noise_rms : ac_rms / 10.0;
    if (target_rms > 0.0) {
        std::vector<double> noise(n);
        Biquad lp = butterworth_lowpass(bw, fs);
        double sumsq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            noise[i] = lp.step(rng.gaussian());
            sumsq += noise[i] * noise[i];
        }
        double rms = std::sqrt(sumsq / static_cast<double>(n));
        double scale = rms > 0.0 ? target_rms / rms : 0.0;
        for (std::size_t i = 0; i < n; ++i) out.stream.current[i] += ac[i] + scale * noise[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) out.stream.current[i] += ac[i];
    }

    return out;
}

}  // namespace ripple
