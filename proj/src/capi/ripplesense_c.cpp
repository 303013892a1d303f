#include "ripplesense.h"

#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "core/baselines.hpp"
#include "core/compare.hpp"
#include "core/csv.hpp"
#include "core/detector.hpp"
#include "core/sim.hpp"
#include "core/svm.hpp"
#include "core/trainer.hpp"
#include "core/types.hpp"

using namespace ripple;

struct rs_stream {
    SampleStream s;
};
struct rs_truth {
    GroundTruth t;
};
struct rs_model {
    SvmModel m;
};
struct rs_pipeline {
    Pipeline p;
};
struct rs_report {
    TrainingReport r;
    std::string text;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
rs_status guard(F&& fn) {
    try {
        fn();
        return RS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return static_cast<rs_status>(static_cast<int>(e.code()));
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return RS_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RS_ERR_INVALID;
    }
}

rs_status einval(const char* msg) {
    g_last_error = msg;
    return RS_ERR_INVALID;
}

MotorSpec to_core(const rs_motor_spec& m) {
    return MotorSpec{m.two_p, m.commutator_bars, m.nominal_voltage, m.no_load_current,
                     m.armature_resistance, m.emf_constant};
}

RippleShape to_core(const rs_ripple_shape& s) {
    return RippleShape{s.rise_fraction, s.steep_fall_fraction, s.slight_fall_fraction,
                       s.ripple_amplitude_ratio};
}

FrontendConfig to_core(const rs_frontend_config& c, double fs) {
    FrontendConfig f;
    f.fc_low = c.fc_low_hz;
    f.fc_up = c.fc_up_hz;
    f.fs = fs;
    f.taps = c.taps;
    f.filter_bank_enabled = c.filter_bank_enabled != 0;
    f.bank_band_count = c.bank_band_count;
    f.bank_q = c.bank_q;
    f.delay = c.delay;
    return f;
}

FeatureConfig to_core(const rs_feature_config& c, double fs, int ppr, int delay, int max_period) {
    FeatureConfig f;
    f.hysteresis = c.hysteresis;
    f.delay = delay;
    if (c.startup_rpm <= 0.0) fail_invalid("startup_rpm must be positive");
    f.initial_period = std::clamp(fs / (c.startup_rpm / 60.0 * ppr), 2.0,
                                  static_cast<double>(max_period));
    f.max_period = max_period;
    f.extended = c.extended != 0;
    return f;
}

DetectorConfig to_core(const rs_detector_config& c) {
    return DetectorConfig{c.pulse_revolution, c.num_pulse_mean};
}

KernelSpec to_core_kernel(const rs_svm_config& c) {
    KernelSpec k;
    switch (c.kernel) {
        case RS_KERNEL_LINEAR: k.kind = KernelKind::linear; break;
        case RS_KERNEL_POLYNOMIAL: k.kind = KernelKind::polynomial; break;
        case RS_KERNEL_RBF: k.kind = KernelKind::gaussian_rbf; break;
        case RS_KERNEL_SIGMOID: k.kind = KernelKind::sigmoid; break;
        default: fail_invalid("unknown kernel kind");
    }
    k.degree = c.degree;
    k.sigma = c.sigma;
    k.gamma = c.gamma;
    k.coef0 = c.coef0;
    return k;
}

PipelineConfig pipeline_config(const rs_frontend_config* frontend,
                               const rs_feature_config* features,
                               const rs_detector_config* detector, double fs) {
    PipelineConfig cfg;
    cfg.frontend = to_core(*frontend, fs);
    cfg.detector = to_core(*detector);
    cfg.features = to_core(*features, fs, cfg.detector.pulse_revolution, cfg.frontend.delay, 4096);
    return cfg;
}

EstimateRecord to_core(const rs_estimate& e) {
    return EstimateRecord{e.sample_index, e.pulse != 0, e.has_speed != 0, e.speed_rpm,
                          e.position_rad};
}

rs_estimate from_core(const EstimateRecord& r) {
    return rs_estimate{r.sample_index, r.pulse ? 1 : 0, r.has_speed ? 1 : 0, r.speed_rpm,
                       r.position_rad};
}

}  // namespace

extern "C" {

const char* rs_last_error(void) { return g_last_error.c_str(); }

int rs_version(void) { return 1; }

void rs_motor_spec_defaults(rs_motor_spec* spec) {
    MotorSpec m;
    *spec = rs_motor_spec{m.two_p, m.commutator_bars, m.nominal_voltage, m.no_load_current,
                          m.armature_resistance, m.emf_constant};
}

rs_status rs_pulses_per_revolution(int two_p, int commutator_bars, int* out) {
    if (!out) return einval("out is null");
    return guard([&] { *out = pulses_per_revolution(two_p, commutator_bars); });
}

void rs_ripple_shape_defaults(rs_ripple_shape* shape) {
    RippleShape s;
    *shape = rs_ripple_shape{s.rise_fraction, s.steep_fall_fraction, s.slight_fall_fraction,
                             s.ripple_amplitude_ratio};
}

void rs_corruption_defaults(rs_corruption* corruption) {
    *corruption = rs_corruption{nullptr, 0, nullptr, 0, -1.0, 0.0};
}

rs_status rs_simulate(const rs_motor_spec* motor, const rs_ripple_shape* shape,
                      const rs_speed_segment* segments, size_t n_segments,
                      const rs_corruption* corruption, double fs, uint64_t seed,
                      rs_stream** out_stream, rs_truth** out_truth) {
    if (!motor || !shape || !segments || !corruption || !out_stream || !out_truth)
        return einval("null argument");
    return guard([&] {
        SpeedProfile profile;
        for (size_t i = 0; i < n_segments; ++i) {
            const auto& seg = segments[i];
            ProfileKind kind;
            switch (seg.kind) {
                case RS_PROFILE_CONSTANT: kind = ProfileKind::constant; break;
                case RS_PROFILE_RAMP: kind = ProfileKind::linear_ramp; break;
                case RS_PROFILE_STEP: kind = ProfileKind::step; break;
                default: fail_invalid("unknown profile kind");
            }
            profile.segments.push_back(
                SpeedSegment{seg.duration_s, kind, seg.start_rpm, seg.end_rpm});
        }
        CorruptionScript script;
        script.false_pulse_times.assign(corruption->false_pulse_times,
                                        corruption->false_pulse_times + corruption->n_false);
        script.ghost_pulse_times.assign(corruption->ghost_pulse_times,
                                        corruption->ghost_pulse_times + corruption->n_ghost);
        script.noise_rms = corruption->noise_rms;
        script.noise_bandwidth = corruption->noise_bandwidth_hz;

        auto sim = generate(to_core(*motor), to_core(*shape), profile, script, fs, seed);
        *out_stream = new rs_stream{std::move(sim.stream)};
        *out_truth = new rs_truth{std::move(sim.truth)};
    });
}

rs_stream* rs_stream_create(const double* samples, size_t n, double fs) {
    if (!samples || n == 0 || fs <= 0.0) return nullptr;
    auto* s = new (std::nothrow) rs_stream;
    if (!s) return nullptr;
    s->s.fs = fs;
    s->s.current.assign(samples, samples + n);
    return s;
}

void rs_stream_free(rs_stream* stream) { delete stream; }

size_t rs_stream_len(const rs_stream* stream) { return stream ? stream->s.size() : 0; }

double rs_stream_fs(const rs_stream* stream) { return stream ? stream->s.fs : 0.0; }

rs_status rs_stream_copy(const rs_stream* stream, double* out, size_t capacity) {
    if (!stream || !out) return einval("null argument");
    if (capacity < stream->s.size()) return einval("buffer too small");
    std::memcpy(out, stream->s.current.data(), stream->s.size() * sizeof(double));
    return RS_OK;
}

void rs_truth_free(rs_truth* truth) { delete truth; }

size_t rs_truth_len(const rs_truth* truth) { return truth ? truth->t.speed_rpm.size() : 0; }

rs_status rs_truth_speed(const rs_truth* truth, double* out, size_t capacity) {
    if (!truth || !out) return einval("null argument");
    if (capacity < truth->t.speed_rpm.size()) return einval("buffer too small");
    std::memcpy(out, truth->t.speed_rpm.data(), truth->t.speed_rpm.size() * sizeof(double));
    return RS_OK;
}

rs_status rs_truth_position(const rs_truth* truth, double* out, size_t capacity) {
    if (!truth || !out) return einval("null argument");
    if (capacity < truth->t.position_rad.size()) return einval("buffer too small");
    std::memcpy(out, truth->t.position_rad.data(), truth->t.position_rad.size() * sizeof(double));
    return RS_OK;
}

size_t rs_truth_pulse_count(const rs_truth* truth) {
    return truth ? truth->t.pulse_indices.size() : 0;
}

rs_status rs_truth_pulses(const rs_truth* truth, int64_t* out, size_t capacity) {
    if (!truth || !out) return einval("null argument");
    if (capacity < truth->t.pulse_indices.size()) return einval("buffer too small");
    std::memcpy(out, truth->t.pulse_indices.data(),
                truth->t.pulse_indices.size() * sizeof(int64_t));
    return RS_OK;
}

rs_status rs_stream_save_csv(const rs_stream* stream, const char* path) {
    if (!stream || !path) return einval("null argument");
    return guard([&] { save_stream_csv(stream->s, path); });
}

rs_status rs_stream_load_csv(const char* path, rs_stream** out) {
    if (!path || !out) return einval("null argument");
    return guard([&] { *out = new rs_stream{load_stream_csv(path)}; });
}

rs_status rs_truth_save_csv(const rs_truth* truth, const char* path) {
    if (!truth || !path) return einval("null argument");
    return guard([&] { save_truth_csv(truth->t, path); });
}

rs_status rs_truth_load_csv(const char* path, rs_truth** out) {
    if (!path || !out) return einval("null argument");
    return guard([&] { *out = new rs_truth{load_truth_csv(path)}; });
}

void rs_frontend_config_defaults(rs_frontend_config* cfg) {
    FrontendConfig f;
    *cfg = rs_frontend_config{f.fc_low, f.fc_up, f.taps, f.filter_bank_enabled ? 1 : 0,
                              f.bank_band_count, f.bank_q, f.delay};
}

void rs_feature_config_defaults(rs_feature_config* cfg) {
    *cfg = rs_feature_config{0.4, 3000.0, 1};
}

void rs_detector_config_defaults(rs_detector_config* cfg) {
    DetectorConfig d;
    *cfg = rs_detector_config{d.pulse_revolution, d.num_pulse_mean};
}

void rs_svm_config_defaults(rs_svm_config* cfg) {
    KernelSpec k;
    *cfg = rs_svm_config{RS_KERNEL_POLYNOMIAL, k.degree, k.sigma, k.gamma, k.coef0,
                         10.0, 1e-3, 100};
}

rs_status rs_model_load(const char* path, rs_model** out) {
    if (!path || !out) return einval("null argument");
    return guard([&] { *out = new rs_model{SvmModel::load(path)}; });
}

rs_status rs_model_save(const rs_model* model, const char* path) {
    if (!model || !path) return einval("null argument");
    return guard([&] { model->m.save(path); });
}

void rs_model_free(rs_model* model) { delete model; }

int rs_model_dim(const rs_model* model) {
    return model ? static_cast<int>(model->m.dim()) : 0;
}

size_t rs_model_num_sv(const rs_model* model) {
    return model ? model->m.support_vectors.size() : 0;
}

rs_status rs_model_decide(const rs_model* model, const double* features, size_t dim,
                          int* out_label, double* out_value) {
    if (!model || !features || !out_label) return einval("null argument");
    return guard([&] {
        std::span<const double> x(features, dim);
        double v = model->m.decision_value(x);
        *out_label = v >= 0.0 ? 1 : -1;
        if (out_value) *out_value = v;
    });
}

rs_status rs_pipeline_create(const rs_model* model, const rs_frontend_config* frontend,
                             const rs_feature_config* features,
                             const rs_detector_config* detector, double fs, rs_pipeline** out) {
    if (!model || !frontend || !features || !detector || !out) return einval("null argument");
    return guard([&] {
        auto cfg = pipeline_config(frontend, features, detector, fs);
        *out = new rs_pipeline{Pipeline(model->m, cfg, fs)};
    });
}

void rs_pipeline_free(rs_pipeline* pipeline) { delete pipeline; }

int rs_pipeline_lag(const rs_pipeline* pipeline) { return pipeline ? pipeline->p.lag() : 0; }

rs_status rs_pipeline_push(rs_pipeline* pipeline, double sample, rs_estimate* out, int* has_out) {
    if (!pipeline || !out || !has_out) return einval("null argument");
    return guard([&] {
        auto rec = pipeline->p.push(sample);
        *has_out = rec.has_value() ? 1 : 0;
        if (rec) *out = from_core(*rec);
    });
}

rs_status rs_pipeline_run(rs_pipeline* pipeline, const double* samples, size_t n,
                          rs_estimate* out, size_t* out_n) {
    if (!pipeline || !samples || !out || !out_n) return einval("null argument");
    return guard([&] {
        size_t count = 0;
        for (size_t i = 0; i < n; ++i) {
            auto rec = pipeline->p.push(samples[i]);
            if (rec) out[count++] = from_core(*rec);
        }
        *out_n = count;
    });
}

rs_status rs_estimates_save_csv(const rs_estimate* records, size_t n, const char* path) {
    if (!records || !path) return einval("null argument");
    return guard([&] {
        std::vector<EstimateRecord> recs;
        recs.reserve(n);
        for (size_t i = 0; i < n; ++i) recs.push_back(to_core(records[i]));
        save_estimates_csv(recs, path);
    });
}

rs_status rs_estimates_load_csv(const char* path, rs_estimate** out, size_t* out_n) {
    if (!path || !out || !out_n) return einval("null argument");
    return guard([&] {
        auto recs = load_estimates_csv(path);
        auto* arr = new rs_estimate[recs.size()];
        for (size_t i = 0; i < recs.size(); ++i) arr[i] = from_core(recs[i]);
        *out = arr;
        *out_n = recs.size();
    });
}

void rs_estimates_free(rs_estimate* records) { delete[] records; }

rs_status rs_evaluate(const rs_estimate* records, size_t n, const rs_truth* truth, double fs,
                      const rs_detector_config* detector, rs_error_summary* out) {
    if (!records || !truth || !detector || !out) return einval("null argument");
    return guard([&] {
        std::vector<EstimateRecord> recs;
        recs.reserve(n);
        for (size_t i = 0; i < n; ++i) recs.push_back(to_core(records[i]));
        auto ev = evaluate_records(recs, truth->t, detector->pulse_revolution, fs,
                                   detector->num_pulse_mean);
        *out = rs_error_summary{ev.mean_true_speed_rpm, ev.mean_abs_err_rpm, ev.mean_rel_err_pct,
                                ev.dev_abs_rpm,         ev.dev_rel_pct,     ev.mean_abs_pos_err_rad,
                                ev.true_pulses,         ev.detected_pulses, ev.speed_emissions};
    });
}

rs_status rs_errors_save_csv(const rs_error_summary* rows, size_t n, const char* path) {
    if (!rows || !path) return einval("null argument");
    return guard([&] {
        std::vector<StreamEval> evals;
        for (size_t i = 0; i < n; ++i) {
            StreamEval ev;
            ev.mean_true_speed_rpm = rows[i].mean_true_speed_rpm;
            ev.mean_abs_err_rpm = rows[i].mean_abs_err_rpm;
            ev.mean_rel_err_pct = rows[i].mean_rel_err_pct;
            ev.dev_abs_rpm = rows[i].dev_abs_rpm;
            ev.dev_rel_pct = rows[i].dev_rel_pct;
            ev.mean_abs_pos_err_rad = rows[i].mean_abs_pos_err_rad;
            evals.push_back(ev);
        }
        save_errors_csv(evals, path);
    });
}

void rs_baseline_params_defaults(rs_baseline_params* params) {
    BaselineParams p;
    *params = rs_baseline_params{p.expected_rpm, p.pulse_revolution, p.window_periods, p.fc_low,
                                 p.hysteresis_fraction};
}

rs_status rs_baseline_detect(const rs_stream* stream, rs_baseline_kind kind,
                             const rs_baseline_params* params, int64_t* out, size_t capacity,
                             size_t* out_n) {
    if (!stream || !params || !out || !out_n) return einval("null argument");
    return guard([&] {
        BaselineKind k;
        switch (kind) {
            case RS_BASELINE_MINMAX_MEAN: k = BaselineKind::minmax_mean; break;
            case RS_BASELINE_HIGHPASS_ZERO: k = BaselineKind::highpass_zero; break;
            case RS_BASELINE_LOWPASS_DC: k = BaselineKind::lowpass_dc; break;
            default: fail_invalid("unknown baseline kind");
        }
        BaselineParams p{params->expected_rpm, params->pulse_revolution, params->window_periods,
                         params->fc_low_hz, params->hysteresis_fraction};
        auto pulses = baseline_detect(stream->s, k, p);
        if (pulses.size() > capacity) fail_invalid("output buffer too small");
        std::memcpy(out, pulses.data(), pulses.size() * sizeof(int64_t));
        *out_n = pulses.size();
    });
}

void rs_trainer_config_defaults(rs_trainer_config* cfg) {
    rs_frontend_config_defaults(&cfg->frontend);
    rs_feature_config_defaults(&cfg->features);
    rs_detector_config_defaults(&cfg->detector);
    rs_svm_config_defaults(&cfg->svm);
    TrainerConfig t;
    cfg->interval_samples = t.interval_samples;
    cfg->negative_cap_ratio = t.negative_cap_ratio;
    cfg->max_iterations = t.max_iterations;
    cfg->seed = t.seed;
}

rs_status rs_train(const rs_stream* const* streams, const rs_truth* const* truths,
                   const rs_motor_spec* motors, size_t n_items,
                   const rs_end_criterion* criterion, const rs_trainer_config* cfg,
                   rs_model** out_model, rs_report** out_report) {
    if (!streams || !truths || !motors || !criterion || !cfg || !out_model || !out_report)
        return einval("null argument");
    if (n_items == 0) return einval("training corpus is empty");
    return guard([&] {
        Corpus corpus;
        for (size_t i = 0; i < n_items; ++i) {
            if (!streams[i] || !truths[i]) fail_invalid("null corpus item");
            CorpusItem item;
            item.name = "stream-" + std::to_string(i);
            item.motor = to_core(motors[i]);
            item.stream = streams[i]->s;
            item.truth = truths[i]->t;
            corpus.items.push_back(std::move(item));
        }
        EndCriterion crit{criterion->max_mean_speed_error_pct, criterion->max_position_error_rad};

        double fs = corpus.items.front().stream.fs;
        TrainerConfig tc;
        tc.frontend = to_core(cfg->frontend, fs);
        tc.features.hysteresis = cfg->features.hysteresis;
        tc.features.delay = cfg->frontend.delay;
        tc.features.extended = cfg->features.extended != 0;
        tc.detector = to_core(cfg->detector);
        tc.kernel = to_core_kernel(cfg->svm);
        tc.c = cfg->svm.c;
        tc.smo_tol = cfg->svm.tol;
        tc.smo_max_passes = cfg->svm.max_passes;
        tc.interval_samples = cfg->interval_samples;
        tc.negative_cap_ratio = cfg->negative_cap_ratio;
        tc.max_iterations = cfg->max_iterations;
        tc.seed = cfg->seed;

        auto report = run_training(corpus, crit, tc);
        auto* rep = new rs_report{report, report.text()};
        *out_report = rep;
        *out_model = report.model ? new rs_model{*report.model} : nullptr;
        if (!report.converged)
            throw Error(ErrorCode::non_convergence,
                        "training did not converge within the iteration budget");
    });
}

void rs_report_free(rs_report* report) { delete report; }

int rs_report_converged(const rs_report* report) {
    return report && report->r.converged ? 1 : 0;
}

int rs_report_iterations(const rs_report* report) {
    return report ? report->r.iterations : 0;
}

const char* rs_report_text(const rs_report* report) {
    return report ? report->text.c_str() : "";
}

rs_status rs_default_corpus(const rs_motor_spec* motor, double fs, uint64_t seed,
                            rs_stream*** out_streams, rs_truth*** out_truths, size_t* out_n) {
    if (!motor || !out_streams || !out_truths || !out_n) return einval("null argument");
    return guard([&] {
        auto specs = default_corpus_specs(to_core(*motor));
        auto corpus = build_corpus(specs, fs, seed);
        size_t n = corpus.items.size();
        auto** streams = new rs_stream*[n];
        auto** truths = new rs_truth*[n];
        for (size_t i = 0; i < n; ++i) {
            streams[i] = new rs_stream{std::move(corpus.items[i].stream)};
            truths[i] = new rs_truth{std::move(corpus.items[i].truth)};
        }
        *out_streams = streams;
        *out_truths = truths;
        *out_n = n;
    });
}

void rs_corpus_free(rs_stream** streams, rs_truth** truths, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (streams) delete streams[i];
        if (truths) delete truths[i];
    }
    delete[] streams;
    delete[] truths;
}

rs_status rs_calibrate_ppr(const rs_stream* stream, double known_speed_rpm, const rs_model* model,
                           const rs_frontend_config* frontend, const rs_feature_config* features,
                           int* out_ppr) {
    if (!stream || !model || !frontend || !features || !out_ppr) return einval("null argument");
    return guard([&] {
        rs_detector_config det;
        rs_detector_config_defaults(&det);
        det.num_pulse_mean = 1;
        auto cfg = pipeline_config(frontend, features, &det, stream->s.fs);
        *out_ppr = calibrate_pulses_per_revolution(stream->s, known_speed_rpm, model->m, cfg);
    });
}

rs_status rs_manifest_save_csv(const rs_corruption_event* events, size_t n, const char* path) {
    if ((!events && n > 0) || !path) return einval("null argument");
    return guard([&] {
        std::vector<CorruptionEvent> evs;
        for (size_t i = 0; i < n; ++i)
            evs.push_back(CorruptionEvent{events[i].is_ghost != 0, events[i].time_s});
        save_manifest_csv(evs, path);
    });
}

rs_status rs_manifest_load_csv(const char* path, rs_corruption_event** out, size_t* out_n) {
    if (!path || !out || !out_n) return einval("null argument");
    return guard([&] {
        auto evs = load_manifest_csv(path);
        auto* arr = new rs_corruption_event[evs.size()];
        for (size_t i = 0; i < evs.size(); ++i)
            arr[i] = rs_corruption_event{evs[i].ghost ? 1 : 0, evs[i].time_s};
        *out = arr;
        *out_n = evs.size();
    });
}

void rs_manifest_free(rs_corruption_event* events) { delete[] events; }

rs_status rs_compare(const rs_stream* stream, const rs_truth* truth, const rs_model* model,
                     const rs_frontend_config* frontend, const rs_feature_config* features,
                     const rs_detector_config* detector, const rs_corruption_event* events,
                     size_t n_events, const rs_baseline_params* baseline_params,
                     const char* out_csv_path) {
    if (!stream || !truth || !frontend || !features || !detector || !baseline_params ||
        !out_csv_path || (!events && n_events > 0))
        return einval("null argument");
    return guard([&] {
        auto cfg = pipeline_config(frontend, features, detector, stream->s.fs);
        BaselineParams bp{baseline_params->expected_rpm, baseline_params->pulse_revolution,
                          baseline_params->window_periods, baseline_params->fc_low_hz,
                          baseline_params->hysteresis_fraction};
        std::vector<CorruptionEvent> evs;
        for (size_t i = 0; i < n_events; ++i)
            evs.push_back(CorruptionEvent{events[i].is_ghost != 0, events[i].time_s});
        std::optional<SvmModel> m;
        if (model) m = model->m;
        auto table = compare_methods(stream->s, truth->t, m, cfg, bp, evs);
        save_comparison_csv(table, out_csv_path);
    });
}

} /* extern "C" */
