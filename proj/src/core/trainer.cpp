#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "core/rng.hpp"

namespace ripple {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double startup_rpm_of(const CorpusItem& item) {
    return item.truth.speed_rpm.empty() ? 3000.0 : item.truth.speed_rpm.front();
}

double local_period(const CorpusItem& item, std::int64_t at) {
    auto i = std::clamp<std::int64_t>(at, 0, static_cast<std::int64_t>(item.truth.speed_rpm.size()) - 1);
    double rpm = item.truth.speed_rpm[static_cast<std::size_t>(i)];
    return item.stream.fs / (rpm / 60.0 * item.motor.pulses_per_revolution());
}

struct PulseMatch {
    std::vector<std::int64_t> missed;    // truth indices with no detection nearby
    std::vector<std::int64_t> spurious;  // detections matching no truth pulse
};

PulseMatch match_pulses(const std::vector<std::int64_t>& detected, const CorpusItem& item,
                        std::int64_t range_end) {
    PulseMatch out;
    std::vector<bool> used(detected.size(), false);
    for (std::int64_t p : item.truth.pulse_indices) {
        if (p >= range_end) break;
        double tol = 0.45 * local_period(item, p);
        auto it = std::lower_bound(detected.begin(), detected.end(),
                                   p - static_cast<std::int64_t>(tol) - 1);
        bool matched = false;
        for (; it != detected.end() && static_cast<double>(*it) <= p + tol; ++it) {
            auto k = static_cast<std::size_t>(it - detected.begin());
            if (!used[k]) {
                used[k] = true;
                matched = true;
                break;
            }
        }
        if (!matched) out.missed.push_back(p);
    }
    for (std::size_t k = 0; k < detected.size(); ++k)
        if (!used[k]) out.spurious.push_back(detected[k]);
    return out;
}

std::uint64_t sample_key(std::size_t item, int pass, std::int64_t row) {
    return (static_cast<std::uint64_t>(item) << 40) |
           (static_cast<std::uint64_t>(pass) << 36) | static_cast<std::uint64_t>(row);
}

}  // namespace

void EndCriterion::validate() const {
    if (max_mean_speed_error_pct <= 0.0 || max_position_error_rad <= 0.0)
        fail_invalid("end criterion thresholds must be positive");
}

void TrainerConfig::validate() const {
    frontend.validate();
    features.validate();
    detector.validate();
    kernel.validate();
    if (c <= 0.0) fail_invalid("penalty C must be positive");
    if (negative_cap_ratio < 1) fail_invalid("negative_cap_ratio must be >= 1");
    if (max_iterations < 0) fail_invalid("max_iterations must be >= 0");
}

TrainerConfig reference_trainer_config(double fs) {
    if (fs <= 0.0) fail_invalid("fs must be positive");
    TrainerConfig cfg;
    cfg.frontend.fs = fs;
    cfg.frontend.fc_low = 25.0;
    cfg.frontend.fc_up = std::min(1400.0, 0.28 * fs);
    auto taps = static_cast<int>(std::llround(fs / 25.0)) | 1;  // ~40 ms span, odd
    cfg.frontend.taps = std::max(taps, 51);
    cfg.frontend.delay = (cfg.frontend.taps - 1) / 2;
    cfg.features.delay = cfg.frontend.delay;
    cfg.features.hysteresis = 0.4;
    cfg.features.extended = true;
    cfg.detector.num_pulse_mean = 16;
    cfg.kernel.kind = KernelKind::gaussian_rbf;
    cfg.kernel.sigma = 3.0;
    cfg.c = 10.0;
    return cfg;
}

Corpus build_corpus(const std::vector<CorpusItemSpec>& specs, double fs, std::uint64_t seed) {
    if (specs.empty()) fail_invalid("corpus spec list is empty");
    Corpus corpus;
    bool have_const = false, have_ramp = false, have_step = false;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        for (const auto& seg : s.profile.segments) {
            have_const |= seg.kind == ProfileKind::constant;
            have_ramp |= seg.kind == ProfileKind::linear_ramp;
            have_step |= seg.kind == ProfileKind::step;
        }
        auto sim = generate(s.motor, s.shape, s.profile, s.corruption, fs,
                            seed + static_cast<std::uint64_t>(i));
        corpus.items.push_back(CorpusItem{s.name, s.motor, std::move(sim.stream), std::move(sim.truth)});
    }
    if (!have_const) corpus.warnings.push_back("corpus has no constant-speed profile");
    if (!have_ramp) corpus.warnings.push_back("corpus has no ramp profile");
    if (!have_step) corpus.warnings.push_back("corpus has no speed-step profile");
    return corpus;
}

std::vector<CorpusItemSpec> default_corpus_specs(const MotorSpec& motor) {
    RippleShape shape;
    auto clean = CorruptionScript{};
    auto item = [&](std::string name, SpeedProfile p, CorruptionScript c) {
        return CorpusItemSpec{std::move(name), motor, shape, std::move(p), std::move(c)};
    };
    auto corrupt = [](std::initializer_list<double> f, std::initializer_list<double> g) {
        CorruptionScript c;
        c.false_pulse_times = f;
        c.ghost_pulse_times = g;
        return c;
    };

    // false pulses are a low-speed phenomenon (at high speed the period is too
    // cramped for a distinct extra excursion); ghosts occur anywhere
    return {
        item("const-500", SpeedProfile::constant(500.0, 1.6), clean),
        item("const-1200-corrupt", SpeedProfile::constant(1200.0, 1.4),
             corrupt({0.45, 0.80, 1.15}, {0.62})),
        item("const-2100-corrupt", SpeedProfile::constant(2100.0, 1.5),
             corrupt({0.40, 0.70, 1.00}, {0.55, 0.85})),
        item("const-3000", SpeedProfile::constant(3000.0, 1.0), clean),
        item("const-3800-corrupt", SpeedProfile::constant(3800.0, 1.2),
             corrupt({}, {0.35, 0.62, 0.89})),
        item("const-4400-corrupt", SpeedProfile::constant(4400.0, 1.3),
             corrupt({}, {0.40, 0.70, 1.00})),
        item("const-5200-corrupt", SpeedProfile::constant(5200.0, 1.0),
             corrupt({}, {0.33, 0.56, 0.79})),
        item("const-6000", SpeedProfile::constant(6000.0, 1.0), clean),
        item("ramp-800-2400", SpeedProfile::ramp(800.0, 2400.0, 1.5), clean),
        item("ramp-4000-5600", SpeedProfile::ramp(4000.0, 5600.0, 1.2), clean),
        item("step-2000-4000", SpeedProfile::step(2000.0, 4000.0, 1.6), clean),
        item("step-1000-2500-corrupt", SpeedProfile::step(1000.0, 2500.0, 1.4),
             corrupt({0.35}, {1.05})),
    };
}

bool SampleList::insert(LabeledSample s) {
    auto it = std::lower_bound(keys_sorted.begin(), keys_sorted.end(), s.key);
    if (it != keys_sorted.end() && *it == s.key) return false;
    keys_sorted.insert(it, s.key);
    samples.push_back(std::move(s));
    return true;
}

std::size_t SampleList::positives() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.label > 0;
    return n;
}

void SampleList::clear() {
    samples.clear();
    keys_sorted.clear();
}

PipelineConfig pipeline_config_for(const TrainerConfig& cfg, const MotorSpec& motor,
                                   double startup_rpm, double fs) {
    PipelineConfig p;
    p.frontend = cfg.frontend;
    p.frontend.fs = fs;
    p.features = cfg.features;
    double n0 = fs / (startup_rpm / 60.0 * motor.pulses_per_revolution());
    p.features.initial_period = std::clamp(n0, 2.0, static_cast<double>(cfg.features.max_period));
    p.detector = cfg.detector;
    p.detector.pulse_revolution = motor.pulses_per_revolution();
    return p;
}

namespace {

// one teacher-forced pass over the chain, committing pulses at `commit_at`;
// captures the normalized stream and optionally the features
void teacher_pass(const CorpusItem& item, const PipelineConfig& pcfg,
                  const std::set<std::int64_t>& commit_at, std::vector<double>* normalized_out,
                  TeacherFeatures* features_out) {
    FirBandpass fir(pcfg.frontend);
    FilterBank bank(pcfg.frontend);
    Normalizer norm(4.0 * pcfg.features.initial_period);
    FeatureExtractor fx(pcfg.features);

    std::int64_t row = 0;
    for (double raw : item.stream.current) {
        auto y = fir.push(raw);
        if (!y) continue;
        double banked = bank.push(*y, fx.period_estimate());
        norm.set_window(std::max(8.0, 4.0 * fx.period_estimate()));
        double xn = norm.push(banked);
        if (normalized_out) normalized_out->push_back(xn);
        auto fv = fx.push(xn);
        if (!fv) continue;
        bool pulse = commit_at.count(row) > 0;
        fx.commit_pulse(pulse);
        if (features_out) {
            features_out->rows.push_back(fv->values());
            features_out->labels.push_back(pulse ? 1 : -1);
            if (pulse) features_out->pulse_rows.push_back(row);
        }
        ++row;
    }
}

}  // namespace

namespace {

// mark the ambiguity band around each pulse and the warm-up stretch unusable;
// masked pulses have no defined maximum, so their whole neighborhood is
// ambiguous
void scrub_labels(TeacherFeatures& tf, const CorpusItem& item, double initial_period,
                  const std::set<std::int64_t>& weak_pulses) {
    for (std::int64_t p : tf.pulse_rows) {
        // a masked pulse could plausibly have been called anywhere in the
        // noise leading up to it, but the states after its commit are exactly
        // the post-detection states that must stay negative
        double pre = weak_pulses.count(p) ? 0.35 : 0.1;
        auto band_pre = std::max<std::int64_t>(
            2, static_cast<std::int64_t>(std::llround(pre * local_period(item, p))));
        auto band_post = std::max<std::int64_t>(
            2, static_cast<std::int64_t>(std::llround(0.1 * local_period(item, p))));
        for (std::int64_t j = std::max<std::int64_t>(0, p - band_pre);
             j <= std::min<std::int64_t>(static_cast<std::int64_t>(tf.labels.size()) - 1,
                                         p + band_post);
             ++j)
            if (tf.labels[static_cast<std::size_t>(j)] < 0)
                tf.labels[static_cast<std::size_t>(j)] = 0;
    }
    auto warmup = static_cast<std::int64_t>(std::llround(8.0 * initial_period));
    for (std::int64_t j = 0;
         j < std::min<std::int64_t>(warmup, static_cast<std::int64_t>(tf.labels.size())); ++j)
        tf.labels[static_cast<std::size_t>(j)] = 0;
    tf.pulse_rows.erase(std::remove_if(tf.pulse_rows.begin(), tf.pulse_rows.end(),
                                       [&](std::int64_t p) { return p < warmup; }),
                        tf.pulse_rows.end());
}

}  // namespace

TeacherData teacher_features(const CorpusItem& item, const TrainerConfig& cfg) {
    PipelineConfig pcfg = pipeline_config_for(cfg, item.motor, startup_rpm_of(item), item.stream.fs);

    // pass 1: normalized stream with the raw truth indices as feedback, used
    // only to locate the conditioned waveform's peaks
    std::set<std::int64_t> raw_truth(item.truth.pulse_indices.begin(),
                                     item.truth.pulse_indices.end());
    std::vector<double> normalized;
    normalized.reserve(item.stream.size());
    teacher_pass(item, pcfg, raw_truth, &normalized, nullptr);

    // the detection convention puts the pulse on the conditioned waveform's
    // realized maximum; band limiting shifts it systematically off the phase
    // crossing (a sizable fraction of a period when few harmonics survive) and
    // noise moves it further
    std::vector<std::int64_t> snapped_list;
    std::set<std::int64_t> snapped;
    std::set<std::int64_t> weak;
    auto n = static_cast<std::int64_t>(normalized.size());
    for (std::int64_t p : item.truth.pulse_indices) {
        auto halfwidth = std::max<std::int64_t>(
            2, static_cast<std::int64_t>(std::llround(0.3 * local_period(item, p))));
        std::int64_t best = std::clamp<std::int64_t>(p, 0, n - 1);
        for (std::int64_t j = std::max<std::int64_t>(0, p - halfwidth);
             j <= std::min(n - 1, p + halfwidth); ++j)
            if (normalized[static_cast<std::size_t>(j)] > normalized[static_cast<std::size_t>(best)])
                best = j;
        // a masked excursion has no meaningful maximum, only noise: anchor its
        // label on the phase crossing (its whole neighborhood is scrubbed as
        // ambiguous below)
        if (normalized[static_cast<std::size_t>(best)] < 0.6) {
            best = std::clamp<std::int64_t>(p, 0, n - 1);
            weak.insert(best);
        }
        if (snapped.insert(best).second) snapped_list.push_back(best);
    }

    TeacherData out;

    // pass 2: the nominal teacher run, pulses committed on the snapped peaks
    teacher_pass(item, pcfg, snapped, nullptr, &out.normal);
    scrub_labels(out.normal, item, pcfg.features.initial_period, weak);

    // pass 3: withhold the feedback on a deterministic subset of pulses so the
    // post-miss states (elapsed time beyond one period, stale period tracker)
    // appear with positive labels; without them a runtime miss would push the
    // features outside everything the classifier has seen and it could never
    // re-latch. Occasional double drops cover two-period outages.
    std::set<std::int64_t> with_misses;
    std::vector<char> committed(snapped_list.size(), 0);
    std::vector<std::size_t> dropped;
    for (std::size_t k = 0; k < snapped_list.size(); ++k) {
        bool drop = k % 5 == 2 || (k % 17 >= 9 && k % 17 <= 10);
        if (drop) {
            dropped.push_back(k);
            continue;
        }
        committed[k] = 1;
        // commit some pulses up to ~20% of a period late so the states that
        // follow an off-center detection are represented too (early commits
        // would put reset states under the +1 label, so only lateness)
        auto jit = static_cast<std::int64_t>(
            std::llround(0.2 * local_period(item, snapped_list[k])));
        std::int64_t offset =
            jit > 0 ? static_cast<std::int64_t>((k * 2654435761u) % static_cast<std::uint64_t>(jit + 1))
                    : 0;
        with_misses.insert(std::clamp<std::int64_t>(snapped_list[k] + offset, 0, n - 1));
    }
    teacher_pass(item, pcfg, with_misses, nullptr, &out.recovery);
    // labels still mark every true pulse, committed or not
    for (std::size_t r = 0; r < out.recovery.labels.size(); ++r)
        out.recovery.labels[r] = -1;
    out.recovery.pulse_rows.clear();
    for (std::int64_t p : snapped_list)
        if (p < static_cast<std::int64_t>(out.recovery.labels.size())) {
            out.recovery.labels[static_cast<std::size_t>(p)] = 1;
            out.recovery.pulse_rows.push_back(p);
        }
    std::sort(out.recovery.pulse_rows.begin(), out.recovery.pulse_rows.end());
    scrub_labels(out.recovery, item, pcfg.features.initial_period, weak);

    // the recovery pass only adds information between a dropped pulse and the
    // re-latch; elsewhere it duplicates the nominal pass, so blank it there
    std::vector<char> keep(out.recovery.labels.size(), 0);
    for (std::size_t k : dropped) {
        if (k >= snapped_list.size()) continue;
        std::int64_t from = snapped_list[k];
        std::size_t next_committed = k + 1;
        while (next_committed < snapped_list.size() && !committed[next_committed])
            ++next_committed;
        std::int64_t to = next_committed < snapped_list.size()
                              ? snapped_list[next_committed] +
                                    static_cast<std::int64_t>(
                                        std::llround(0.3 * local_period(item, snapped_list[k])))
                              : static_cast<std::int64_t>(out.recovery.labels.size()) - 1;
        for (std::int64_t j = std::max<std::int64_t>(0, from - 2);
             j <= std::min<std::int64_t>(static_cast<std::int64_t>(keep.size()) - 1, to); ++j)
            keep[static_cast<std::size_t>(j)] = 1;
    }
    for (std::size_t r = 0; r < out.recovery.labels.size(); ++r)
        if (!keep[r]) out.recovery.labels[r] = 0;
    out.recovery.pulse_rows.erase(
        std::remove_if(out.recovery.pulse_rows.begin(), out.recovery.pulse_rows.end(),
                       [&](std::int64_t p) {
                           return out.recovery.labels[static_cast<std::size_t>(p)] != 1;
                       }),
        out.recovery.pulse_rows.end());
    return out;
}

bool StreamEval::meets(const EndCriterion& c) const {
    return mean_rel_err_pct <= c.max_mean_speed_error_pct &&
           mean_abs_pos_err_rad <= c.max_position_error_rad;
}

StreamEval evaluate_records(const std::vector<EstimateRecord>& records, const GroundTruth& truth,
                            int pulse_revolution, double fs, int num_pulse_mean) {
    StreamEval ev;
    if (records.empty()) return ev;
    auto in_truth = [&](std::int64_t i) {
        return i >= 0 && i < static_cast<std::int64_t>(truth.speed_rpm.size());
    };

    double speed_sum = 0.0;
    std::size_t speed_n = 0;
    for (const auto& r : records)
        if (in_truth(r.sample_index)) {
            speed_sum += truth.speed_rpm[static_cast<std::size_t>(r.sample_index)];
            ++speed_n;
        }
    if (speed_n) ev.mean_true_speed_rpm = speed_sum / static_cast<double>(speed_n);

    for (std::int64_t p : truth.pulse_indices)
        if (p < static_cast<std::int64_t>(records.size())) ++ev.true_pulses;

    std::vector<double> err, rel;
    std::int64_t first_pulse = -1;
    for (const auto& r : records) {
        if (r.pulse) {
            ++ev.detected_pulses;
            if (first_pulse < 0) first_pulse = r.sample_index;
        }
        if (r.has_speed && in_truth(r.sample_index)) {
            // the emission estimates the mean speed over its averaging window,
            // so score it against the true mean over that same window (exact
            // from the position trace); fall back to the instantaneous truth
            // when the window sticks out of the recording
            double t = truth.speed_rpm[static_cast<std::size_t>(r.sample_index)];
            if (r.speed_rpm > 0.0) {
                auto span = static_cast<std::int64_t>(
                    std::llround(fs * num_pulse_mean * 60.0 / (pulse_revolution * r.speed_rpm)));
                std::int64_t back = r.sample_index - span;
                if (span > 0 && in_truth(back)) {
                    double dtheta = truth.position_rad[static_cast<std::size_t>(r.sample_index)] -
                                    truth.position_rad[static_cast<std::size_t>(back)];
                    t = dtheta / kTwoPi * 60.0 * fs / static_cast<double>(span);
                }
            }
            err.push_back(r.speed_rpm - t);
            rel.push_back((r.speed_rpm - t) / t);
        }
    }
    ev.speed_emissions = err.size();
    if (!err.empty()) {
        double ma = 0.0, mr = 0.0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            ma += std::abs(err[i]);
            mr += std::abs(rel[i]);
        }
        ev.mean_abs_err_rpm = ma / static_cast<double>(err.size());
        ev.mean_rel_err_pct = mr / static_cast<double>(err.size()) * 100.0;
        double me = 0.0, mre = 0.0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            me += err[i];
            mre += rel[i];
        }
        me /= static_cast<double>(err.size());
        mre /= static_cast<double>(err.size());
        double ve = 0.0, vr = 0.0;
        for (std::size_t i = 0; i < err.size(); ++i) {
            ve += (err[i] - me) * (err[i] - me);
            vr += (rel[i] - mre) * (rel[i] - mre);
        }
        ev.dev_abs_rpm = std::sqrt(ve / static_cast<double>(err.size()));
        ev.dev_rel_pct = std::sqrt(vr / static_cast<double>(err.size())) * 100.0;
    }

    // position: align the incremental estimate to truth at the first detection
    double step = kTwoPi / pulse_revolution;
    double offset = 0.0;
    std::size_t pos_start = 0;
    if (first_pulse >= 0 && in_truth(first_pulse)) {
        const auto& r0 = records[static_cast<std::size_t>(first_pulse - records.front().sample_index)];
        double delta = truth.position_rad[static_cast<std::size_t>(first_pulse)] - r0.position_rad;
        offset = std::round(delta / step) * step;
        pos_start = static_cast<std::size_t>(first_pulse - records.front().sample_index);
    }
    double pos_sum = 0.0;
    std::size_t pos_n = 0;
    for (std::size_t i = pos_start; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!in_truth(r.sample_index)) continue;
        pos_sum += std::abs(r.position_rad + offset -
                            truth.position_rad[static_cast<std::size_t>(r.sample_index)]);
        ++pos_n;
    }
    if (pos_n) ev.mean_abs_pos_err_rad = pos_sum / static_cast<double>(pos_n);
    return ev;
}

std::vector<StreamEval> evaluate(const SvmModel& model, const Corpus& corpus,
                                 const PipelineConfig& cfg) {
    std::vector<StreamEval> out;
    for (const auto& item : corpus.items) {
        PipelineConfig pcfg = cfg;
        pcfg.detector.pulse_revolution = item.motor.pulses_per_revolution();
        double n0 = item.stream.fs /
                    (startup_rpm_of(item) / 60.0 * item.motor.pulses_per_revolution());
        pcfg.features.initial_period =
            std::clamp(n0, 2.0, static_cast<double>(cfg.features.max_period));
        Pipeline p(model, pcfg, item.stream.fs);
        auto records = p.run(item.stream.current);
        auto ev = evaluate_records(records, item.truth, item.motor.pulses_per_revolution(),
                                   item.stream.fs, cfg.detector.num_pulse_mean);
        ev.name = item.name;
        out.push_back(ev);
    }
    return out;
}

namespace {

struct Failure {
    std::size_t item = 0;
    std::int64_t center = 0;
    std::size_t severity = 0;  // events on the stream; 0 for speed-error windows
};

std::vector<std::vector<EstimateRecord>> run_all(const SvmModel& model, const Corpus& corpus,
                                                 const TrainerConfig& cfg) {
    std::vector<std::vector<EstimateRecord>> runs;
    runs.reserve(corpus.items.size());
    for (const auto& item : corpus.items) {
        PipelineConfig pcfg =
            pipeline_config_for(cfg, item.motor, startup_rpm_of(item), item.stream.fs);
        Pipeline p(model, pcfg, item.stream.fs);
        runs.push_back(p.run(item.stream.current));
    }
    return runs;
}

std::vector<StreamEval> evals_from_runs(const Corpus& corpus,
                                        const std::vector<std::vector<EstimateRecord>>& runs,
                                        const TrainerConfig& cfg) {
    std::vector<StreamEval> out;
    for (std::size_t idx = 0; idx < corpus.items.size(); ++idx) {
        const auto& item = corpus.items[idx];
        auto ev = evaluate_records(runs[idx], item.truth, item.motor.pulses_per_revolution(),
                                   item.stream.fs, cfg.detector.num_pulse_mean);
        ev.name = item.name;
        out.push_back(ev);
    }
    return out;
}

// all harvestable failure locations of the given runs, most severe first
std::vector<Failure> candidates_from_runs(const Corpus& corpus,
                                          const std::vector<std::vector<EstimateRecord>>& runs,
                                          const TrainerConfig& cfg,
                                          const EndCriterion& criterion) {
    std::vector<Failure> events;
    std::vector<Failure> fallbacks;
    for (std::size_t idx = 0; idx < corpus.items.size(); ++idx) {
        const auto& item = corpus.items[idx];
        const auto& records = runs[idx];

        std::vector<std::int64_t> detections;
        for (const auto& r : records)
            if (r.pulse) detections.push_back(r.sample_index);
        auto match = match_pulses(detections, item, static_cast<std::int64_t>(records.size()));

        // ignore the warm-up stretch: processing lag plus settling time
        auto warmup = static_cast<std::int64_t>(cfg.frontend.delay + cfg.features.delay +
                                                std::llround(8.0 * local_period(item, 0)));
        std::vector<std::int64_t> sites;
        for (std::int64_t m : match.missed)
            if (m > warmup) sites.push_back(m);
        for (std::int64_t sp : match.spurious)
            if (sp > warmup) sites.push_back(sp);
        std::sort(sites.begin(), sites.end());
        for (std::size_t k = 0; k < sites.size() && k < 4; ++k)
            events.push_back(Failure{idx, sites[k], sites.size()});

        auto ev = evaluate_records(records, item.truth, item.motor.pulses_per_revolution(),
                                   item.stream.fs, cfg.detector.num_pulse_mean);
        if (!ev.meets(criterion)) {
            double worst_err = -1.0;
            std::int64_t worst_at = -1;
            for (const auto& r : records) {
                if (!r.has_speed) continue;
                double t = item.truth.speed_rpm[static_cast<std::size_t>(r.sample_index)];
                double e = std::abs((r.speed_rpm - t) / t);
                if (e > worst_err) {
                    worst_err = e;
                    worst_at = r.sample_index;
                }
            }
            if (worst_at < 0) worst_at = static_cast<std::int64_t>(item.stream.size() / 2);
            fallbacks.push_back(Failure{idx, worst_at, 0});
        }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Failure& a, const Failure& b) { return a.severity > b.severity; });
    events.insert(events.end(), fallbacks.begin(), fallbacks.end());
    return events;
}

std::vector<Failure> failure_candidates(const Corpus& corpus, const SvmModel& model,
                                        const TrainerConfig& cfg, const EndCriterion& criterion) {
    return candidates_from_runs(corpus, run_all(model, corpus, cfg), cfg, criterion);
}

using TeacherCache = std::map<std::size_t, TeacherData>;

const TeacherData& cached_teacher(const Corpus& corpus, std::size_t item_idx,
                                  const TrainerConfig& cfg, TeacherCache* cache) {
    static thread_local TeacherData transient;
    if (!cache) {
        transient = teacher_features(corpus.items[item_idx], cfg);
        return transient;
    }
    auto it = cache->find(item_idx);
    if (it == cache->end())
        it = cache->emplace(item_idx, teacher_features(corpus.items[item_idx], cfg)).first;
    return it->second;
}

std::size_t add_interval(const Corpus& corpus, std::size_t item_idx, std::int64_t center,
                         const TrainerConfig& cfg, SampleList& s, TeacherCache* cache) {
    const auto& item = corpus.items[item_idx];
    const auto& teacher = cached_teacher(corpus, item_idx, cfg, cache);
    if (teacher.normal.rows.empty()) return 0;
    auto n_rows = static_cast<std::int64_t>(teacher.normal.rows.size());

    std::int64_t len = cfg.interval_samples > 0
                           ? cfg.interval_samples
                           : static_cast<std::int64_t>(std::round(4.0 * local_period(item, center)));
    len = std::clamp<std::int64_t>(len, 8, n_rows);
    std::int64_t lo = std::clamp<std::int64_t>(center - len / 2, 0, n_rows - len);
    std::int64_t hi = lo + len;

    // the interval must carry at least one positive label
    const auto& pulse_rows = teacher.normal.pulse_rows;
    bool has_pulse = std::any_of(pulse_rows.begin(), pulse_rows.end(),
                                 [&](std::int64_t p) { return p >= lo && p < hi; });
    if (!has_pulse && !pulse_rows.empty()) {
        auto it = std::lower_bound(pulse_rows.begin(), pulse_rows.end(), lo);
        std::int64_t p = it != pulse_rows.end() ? *it : pulse_rows.back();
        lo = std::clamp<std::int64_t>(p - len / 2, 0, n_rows - len);
        hi = lo + len;
    }

    std::size_t added = 0;
    auto add_pass = [&](const TeacherFeatures& tf, int pass) {
        auto end = std::min<std::int64_t>(hi, static_cast<std::int64_t>(tf.rows.size()));
        for (std::int64_t r = lo; r < end; ++r) {
            int label = tf.labels[static_cast<std::size_t>(r)];
            if (label == 0) continue;  // ambiguity band or warm-up
            LabeledSample ls;
            ls.features = tf.rows[static_cast<std::size_t>(r)];
            ls.label = label;
            ls.key = sample_key(item_idx, pass, r);
            if (s.insert(std::move(ls))) ++added;
        }
    };
    add_pass(teacher.normal, 0);
    add_pass(teacher.recovery, 1);
    return added;
}

TrainingSet make_training_set(const SampleList& s, const TrainerConfig& cfg) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < s.samples.size(); ++i)
        (s.samples[i].label > 0 ? pos : neg).push_back(i);
    std::size_t cap = pos.size() * static_cast<std::size_t>(cfg.negative_cap_ratio);
    TrainingSet ts;
    auto push = [&](std::size_t i) {
        ts.x.push_back(s.samples[i].features);
        ts.y.push_back(s.samples[i].label);
    };
    for (std::size_t i : pos) push(i);
    if (neg.size() <= cap) {
        for (std::size_t i : neg) push(i);
    } else {
        for (std::size_t j = 0; j < cap; ++j) push(neg[j * neg.size() / cap]);
    }
    return ts;
}

// Map the features onto a fixed kernel geometry. The features have known
// design ranges (binaries, correlations in [-1,1], counters in period units),
// so fixed affine scaling keeps every retrain in the same metric; statistics
// of the harvested mixture would wander with its composition. The elapsed-time
// and accumulated-amplitude axes get the most resolution: they carry the
// ghost-timing and double-detection structure.
std::pair<std::vector<double>, std::vector<double>> feature_scaling(TrainingSet& ts) {
    std::size_t dim = ts.dim();
    // layout: [lm, ma,] cZ, s, rE, fE, zCD, Lwt, Lwa
    std::vector<double> offset, scale;
    if (dim == 9) {
        offset = {0.5, 0.0, 0.5, 0.0, 0.5, 0.5, 0.25, 1.0, 5.0};
        scale = {2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 0.4};
    } else {
        offset = {0.5, 0.0, 0.5, 0.5, 0.25, 1.0, 5.0};
        scale = {1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 0.4};
    }
    for (auto& row : ts.x)
        for (std::size_t d = 0; d < dim; ++d) row[d] = (row[d] - offset[d]) * scale[d];
    return {offset, scale};
}

}  // namespace

namespace {

HarvestOutcome harvest_random(const Corpus& corpus, SampleList& s, const TrainerConfig& cfg,
                              std::uint64_t salt, TeacherCache* cache) {
    HarvestOutcome out;
    Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + salt);
    for (int attempt = 0; attempt < 20; ++attempt) {
        std::size_t item_idx = rng.index(corpus.items.size());
        const auto& teacher_pulses = cached_teacher(corpus, item_idx, cfg, cache).normal.pulse_rows;
        if (teacher_pulses.empty()) continue;
        std::int64_t center = teacher_pulses[rng.index(teacher_pulses.size())];
        out.added = add_interval(corpus, item_idx, center, cfg, s, cache);
        if (out.added > 0) return out;
    }
    out.escalate = s.size() == 0;
    return out;
}

HarvestOutcome harvest_from_candidates(const Corpus& corpus, const std::vector<Failure>& candidates,
                                       SampleList& s, const TrainerConfig& cfg,
                                       TeacherCache* cache, std::size_t max_intervals = 1) {
    HarvestOutcome out;
    if (candidates.empty()) return out;  // criterion satisfied everywhere: nothing to add
    std::set<std::size_t> taken_items;
    for (const auto& failure : candidates) {
        if (taken_items.count(failure.item)) continue;
        auto added = add_interval(corpus, failure.item, failure.center, cfg, s, cache);
        if (added > 0) {
            out.added += added;
            taken_items.insert(failure.item);
            if (taken_items.size() >= max_intervals) return out;
        }
    }
    if (out.added == 0) out.escalate = true;  // every failing window is already in the list
    return out;
}

}  // namespace

HarvestOutcome harvest_samples(const Corpus& corpus, const std::optional<SvmModel>& model,
                               SampleList& s, const TrainerConfig& cfg, std::uint64_t salt) {
    return harvest_samples_with_criterion(corpus, model, s, cfg, EndCriterion{}, salt);
}

HarvestOutcome harvest_samples_with_criterion(const Corpus& corpus,
                                              const std::optional<SvmModel>& model, SampleList& s,
                                              const TrainerConfig& cfg,
                                              const EndCriterion& criterion, std::uint64_t salt) {
    if (corpus.items.empty()) fail_invalid("corpus is empty");
    if (s.size() == 0 || !model.has_value())
        return harvest_random(corpus, s, cfg, salt, nullptr);
    return harvest_from_candidates(corpus, failure_candidates(corpus, *model, cfg, criterion), s,
                                   cfg, nullptr);
}

TrainingReport run_training(const Corpus& corpus, const EndCriterion& criterion,
                            const TrainerConfig& cfg) {
    criterion.validate();
    cfg.validate();
    if (corpus.items.empty()) fail_invalid("corpus is empty");

    TrainingReport rep;
    rep.warnings = corpus.warnings;

    std::vector<std::pair<double, int>> combos{{cfg.features.hysteresis, cfg.kernel.degree}};
    for (double hy : {0.3, 0.4, 0.5})
        for (int deg : {2, 3, 4})
            if (hy != cfg.features.hysteresis || deg != cfg.kernel.degree)
                combos.emplace_back(hy, deg);
    std::size_t combo_idx = 0;

    TrainerConfig cur = cfg;
    SampleList s;
    std::optional<SvmModel> model;
    TeacherCache teacher_cache;
    // failure candidates of the current model, from the previous iteration's
    // evaluation sweep
    std::optional<std::vector<Failure>> candidates;

    // the best iterate so far, by worst stream metric normalized to the
    // criterion; a non-converged run still returns something usable
    struct Best {
        std::optional<SvmModel> model;
        std::vector<StreamEval> evals;
        double score = std::numeric_limits<double>::infinity();
        double hysteresis = 0.0;
        int degree = 0;
    } best;
    best.hysteresis = cur.features.hysteresis;
    best.degree = cur.kernel.degree;
    int trained_count = 0;

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        rep.iterations = it;
        auto salt = static_cast<std::uint64_t>(it);

        auto do_harvest = [&]() {
            if (s.size() == 0 || !model)
                return harvest_random(corpus, s, cur, salt, &teacher_cache);
            if (!candidates) candidates = failure_candidates(corpus, *model, cur, criterion);
            // spread each iteration's harvest across several failing streams
            // so no single regime dominates the list
            return harvest_from_candidates(corpus, *candidates, s, cur, &teacher_cache, 4);
        };

        auto h = do_harvest();
        if (h.escalate) {
            // every failing window is already harvested: a parameter change is
            // only worth the reset when the model is grossly off; otherwise
            // there is nothing further to learn from this corpus
            bool grossly_off = trained_count >= 2 && best.score > 4.0;
            if (grossly_off && combo_idx + 1 < combos.size()) {
                ++combo_idx;
                cur.features.hysteresis = combos[combo_idx].first;
                cur.kernel.degree = combos[combo_idx].second;
                std::ostringstream msg;
                msg << "iteration " << it << ": parameter change to hysteresis="
                    << cur.features.hysteresis << " degree=" << cur.kernel.degree
                    << ", training samples reset";
                rep.warnings.push_back(msg.str());
                s.clear();
                model.reset();
                candidates.reset();
                teacher_cache.clear();  // the features changed with the hysteresis
                h = do_harvest();
            } else if (trained_count > 0) {
                rep.warnings.push_back("iteration " + std::to_string(it) +
                                       ": no unharvested failures remain, stopping early");
                break;
            }
        }

        IterationStat st;
        st.iteration = it;
        st.sample_count = s.size();
        st.positives = s.positives();
        st.hysteresis = cur.features.hysteresis;
        st.degree = cur.kernel.degree;

        if (st.positives > 0 && st.positives < s.size()) {
            auto ts = make_training_set(s, cur);
            auto [offset, scale] = feature_scaling(ts);
            try {
                auto trained = train_smo(ts, cur.kernel, cur.c, cur.smo_tol, cur.smo_max_passes);
                trained.feature_offset = std::move(offset);
                trained.feature_scale = std::move(scale);
                model = std::move(trained);
                st.trained = true;
                ++trained_count;
                candidates.reset();
            } catch (const Error& e) {
                rep.warnings.push_back("iteration " + std::to_string(it) +
                                       ": training failed: " + e.what());
                model.reset();  // fall back to fresh harvesting next iteration
                candidates.reset();
            }
        }

        if (model) {
            auto runs = run_all(*model, corpus, cur);
            auto evals = evals_from_runs(corpus, runs, cur);
            candidates = candidates_from_runs(corpus, runs, cur, criterion);
            bool all_ok = true;
            double score = 0.0;
            for (const auto& ev : evals) {
                all_ok &= ev.meets(criterion);
                st.worst_speed_err_pct = std::max(st.worst_speed_err_pct, ev.mean_rel_err_pct);
                st.worst_pos_err_rad = std::max(st.worst_pos_err_rad, ev.mean_abs_pos_err_rad);
                score = std::max({score, ev.mean_rel_err_pct / criterion.max_mean_speed_error_pct,
                                  ev.mean_abs_pos_err_rad / criterion.max_position_error_rad});
            }
            if (score < best.score) {
                best.model = model;
                best.evals = evals;
                best.score = score;
                best.hysteresis = cur.features.hysteresis;
                best.degree = cur.kernel.degree;
            }
            rep.trajectory.push_back(st);
            if (all_ok) {
                rep.converged = true;
                break;
            }
        } else {
            rep.trajectory.push_back(st);
        }
    }

    rep.model = best.model;
    rep.final_eval = best.evals;
    if (rep.model) rep.model->hysteresis_hint = best.hysteresis;
    rep.final_hysteresis = best.hysteresis;
    rep.final_degree = best.degree;
    return rep;
}

std::string TrainingReport::text() const {
    std::ostringstream os;
    os << "training " << (converged ? "converged" : "did NOT converge") << " after " << iterations
       << " iteration(s)\n";
    for (const auto& st : trajectory) {
        os << "  iter " << st.iteration << ": samples=" << st.sample_count
           << " positives=" << st.positives << " hysteresis=" << st.hysteresis
           << " degree=" << st.degree;
        if (st.trained)
            os << " worst_speed_err=" << st.worst_speed_err_pct
               << "% worst_pos_err=" << st.worst_pos_err_rad << " rad";
        else
            os << " (no model trained)";
        os << "\n";
    }
    os << "final evaluation:\n";
    for (const auto& ev : final_eval) {
        os << "  " << ev.name << ": mean_speed=" << ev.mean_true_speed_rpm
           << " rpm, mean_abs_err=" << ev.mean_abs_err_rpm << " rpm, mean_rel_err="
           << ev.mean_rel_err_pct << "%, dev_abs=" << ev.dev_abs_rpm
           << " rpm, dev_rel=" << ev.dev_rel_pct << "%, pos_err=" << ev.mean_abs_pos_err_rad
           << " rad, pulses=" << ev.detected_pulses << "/" << ev.true_pulses << "\n";
    }
    for (const auto& w : warnings) os << "warning: " << w << "\n";
    return os.str();
}

}  // namespace ripple
