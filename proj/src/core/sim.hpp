#pragma once

#include <cstdint>

#include "core/types.hpp"

namespace ripple {

struct SimResult {
    SampleStream stream;
    GroundTruth truth;
};

// Value of the unit ripple waveform at phase u in [0, 1). Peak +0.5 at u = 0,
// steep fall, slight fall to the trough at -0.5, then the rise back up.
double ripple_waveform(double u, const RippleShape& shape);

// Synthesize the motor current for the given profile together with exact
// ground truth. Ground-truth pulses mark the waveform peak (one per
// commutation); corruptions alter the waveform only, never the truth.
// Identical arguments and seed reproduce bit-identical output.
SimResult generate(const MotorSpec& spec, const RippleShape& shape, const SpeedProfile& profile,
                   const CorruptionScript& corruption, double fs, std::uint64_t seed);

}  // namespace ripple
