#pragma once

#include <cstdint>
#include <vector>

#include "core/types.hpp"

namespace ripple {

// Comparator-style detectors from the patent literature, kept as foils: they
// fire one pulse per upward crossing of the current through its DC estimate
// and have no way to reject an extra excursion or recover a masked one.
enum class BaselineKind {
    minmax_mean,    // DC = (windowed max + min) / 2
    highpass_zero,  // remove DC with a high-pass, compare against zero
    lowpass_dc,     // DC from a low-pass, compare current against it
};

struct BaselineParams {
    double expected_rpm = 3000.0;       // sizes the min/max window
    int pulse_revolution = 6;
    double window_periods = 2.0;        // min/max window, in ripple periods
    double fc_low = 100.0;             // Hz, high-pass cutoff; low-pass uses fc_low/4
    double hysteresis_fraction = 0.2;  // of the tracked peak-to-peak amplitude

    void validate() const;
};

std::vector<std::int64_t> baseline_detect(const SampleStream& stream, BaselineKind kind,
                                          const BaselineParams& params);

}  // namespace ripple
