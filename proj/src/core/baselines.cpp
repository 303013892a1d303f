#include "core/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace ripple {

namespace {

// Sliding-window extrema via monotonic deques.
class MinMaxWindow {
public:
    explicit MinMaxWindow(std::size_t width) : width_(width) {}

    void push(std::size_t i, double v) {
        while (!maxq_.empty() && maxq_.back().second <= v) maxq_.pop_back();
        maxq_.emplace_back(i, v);
        while (!minq_.empty() && minq_.back().second >= v) minq_.pop_back();
        minq_.emplace_back(i, v);
        std::size_t cutoff = i >= width_ ? i - width_ + 1 : 0;
        while (maxq_.front().first < cutoff) maxq_.pop_front();
        while (minq_.front().first < cutoff) minq_.pop_front();
    }

    double max() const { return maxq_.front().second; }
    double min() const { return minq_.front().second; }

private:
    std::size_t width_;
    std::deque<std::pair<std::size_t, double>> maxq_, minq_;
};

}  // namespace

void BaselineParams::validate() const {
    if (expected_rpm <= 0.0) fail_invalid("expected_rpm must be positive");
    if (pulse_revolution < 1) fail_invalid("pulse_revolution must be >= 1");
    if (window_periods <= 0.0) fail_invalid("window_periods must be positive");
    if (fc_low <= 0.0) fail_invalid("fc_low must be positive");
    if (hysteresis_fraction <= 0.0 || hysteresis_fraction >= 0.5)
        fail_invalid("hysteresis_fraction must be in (0, 0.5)");
}

std::vector<std::int64_t> baseline_detect(const SampleStream& stream, BaselineKind kind,
                                          const BaselineParams& params) {
    params.validate();
    if (stream.fs <= 0.0) fail_invalid("stream has no sampling rate");
    double fs = stream.fs;
    double period = fs / (params.expected_rpm / 60.0 * params.pulse_revolution);
    auto width = static_cast<std::size_t>(std::max(4.0, std::round(params.window_periods * period)));

    // the amplitude tracker must straddle a masked period without collapsing
    MinMaxWindow amp_win(3 * width);
    MinMaxWindow dc_win(width);

    double dt = 1.0 / fs;
    double rc_hp = 1.0 / (6.283185307179586 * params.fc_low);
    double a_hp = rc_hp / (rc_hp + dt);
    double rc_lp = 1.0 / (6.283185307179586 * params.fc_low / 4.0);
    double b_lp = dt / (rc_lp + dt);

    double hp = 0.0, lp = stream.current.empty() ? 0.0 : stream.current.front();
    double x_prev = lp;

    std::vector<std::int64_t> pulses;
    bool armed = false;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        double x = stream.current[i];
        double v = 0.0;
        switch (kind) {
            case BaselineKind::minmax_mean:
                dc_win.push(i, x);
                v = x - 0.5 * (dc_win.max() + dc_win.min());
                break;
            case BaselineKind::highpass_zero:
                hp = a_hp * (hp + x - x_prev);
                v = hp;
                break;
            case BaselineKind::lowpass_dc:
                lp += b_lp * (x - lp);
                v = x - lp;
                break;
        }
        x_prev = x;
        amp_win.push(i, v);
        double band = params.hysteresis_fraction * (amp_win.max() - amp_win.min());
        if (i < width) continue;  // window not yet representative
        if (band <= 0.0) continue;
        if (!armed) {
            if (v < -band) armed = true;
        } else if (v > band) {
            pulses.push_back(static_cast<std::int64_t>(i));
            armed = false;
        }
    }
    return pulses;
}

}  // namespace ripple
