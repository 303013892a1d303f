/*
 * ripplesense - sensorless speed and position estimation for brushed DC
 * motors from the current ripple, with an SVM pulse classifier.
 *
 * C API: opaque handles, status-code returns. All functions return RS_OK on
 * success; on failure they return a status code and leave a description in
 * rs_last_error() (thread local). Status codes double as CLI exit codes.
 */
#ifndef RIPPLESENSE_H
#define RIPPLESENSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RS_API __declspec(dllexport)
#else
#define RS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rs_status {
    RS_OK = 0,
    RS_ERR_INVALID = 2,
    RS_ERR_NO_CONVERGENCE = 3,
    RS_ERR_IO = 4,
} rs_status;

RS_API const char* rs_last_error(void);
RS_API int rs_version(void);

/* ------------------------------------------------------------------ motor */

typedef struct rs_motor_spec {
    int two_p;              /* pole count (2p), even */
    int commutator_bars;    /* k */
    double nominal_voltage; /* V */
    double no_load_current; /* A */
    double armature_resistance; /* ohm */
    double emf_constant;        /* V per r/min */
} rs_motor_spec;

RS_API void rs_motor_spec_defaults(rs_motor_spec* spec);
RS_API rs_status rs_pulses_per_revolution(int two_p, int commutator_bars, int* out);

/* -------------------------------------------------------------- simulator */

typedef struct rs_ripple_shape {
    double rise_fraction;
    double steep_fall_fraction;
    double slight_fall_fraction;
    double ripple_amplitude_ratio;
} rs_ripple_shape;

RS_API void rs_ripple_shape_defaults(rs_ripple_shape* shape);

typedef enum rs_profile_kind {
    RS_PROFILE_CONSTANT = 0,
    RS_PROFILE_RAMP = 1,
    RS_PROFILE_STEP = 2, /* jumps from start to end speed at mid-segment */
} rs_profile_kind;

typedef struct rs_speed_segment {
    double duration_s;
    rs_profile_kind kind;
    double start_rpm;
    double end_rpm;
} rs_speed_segment;

typedef struct rs_corruption {
    const double* false_pulse_times; /* seconds */
    size_t n_false;
    const double* ghost_pulse_times;
    size_t n_ghost;
    double noise_rms;          /* A; < 0 selects ~20 dB in-band SNR */
    double noise_bandwidth_hz; /* <= 0 selects fs/4 */
} rs_corruption;

RS_API void rs_corruption_defaults(rs_corruption* corruption);

typedef struct rs_stream rs_stream; /* current samples at a fixed rate */
typedef struct rs_truth rs_truth;   /* per-sample speed/position + pulse indices */

RS_API rs_status rs_simulate(const rs_motor_spec* motor, const rs_ripple_shape* shape,
                             const rs_speed_segment* segments, size_t n_segments,
                             const rs_corruption* corruption, double fs, uint64_t seed,
                             rs_stream** out_stream, rs_truth** out_truth);

RS_API rs_stream* rs_stream_create(const double* samples, size_t n, double fs);
RS_API void rs_stream_free(rs_stream* stream);
RS_API size_t rs_stream_len(const rs_stream* stream);
RS_API double rs_stream_fs(const rs_stream* stream);
RS_API rs_status rs_stream_copy(const rs_stream* stream, double* out, size_t capacity);

RS_API void rs_truth_free(rs_truth* truth);
RS_API size_t rs_truth_len(const rs_truth* truth);
RS_API rs_status rs_truth_speed(const rs_truth* truth, double* out, size_t capacity);
RS_API rs_status rs_truth_position(const rs_truth* truth, double* out, size_t capacity);
RS_API size_t rs_truth_pulse_count(const rs_truth* truth);
RS_API rs_status rs_truth_pulses(const rs_truth* truth, int64_t* out, size_t capacity);

/* CSV formats: stream = (sample_index,time_s,current_A),
 * truth = (sample_index,speed_rpm,position_rad,pulse_flag). */
RS_API rs_status rs_stream_save_csv(const rs_stream* stream, const char* path);
RS_API rs_status rs_stream_load_csv(const char* path, rs_stream** out);
RS_API rs_status rs_truth_save_csv(const rs_truth* truth, const char* path);
RS_API rs_status rs_truth_load_csv(const char* path, rs_truth** out);

/* ------------------------------------------------------------ configuration */

typedef struct rs_frontend_config {
    double fc_low_hz;
    double fc_up_hz;
    int taps;                /* FIR length, odd */
    int filter_bank_enabled; /* 0/1 */
    int bank_band_count;
    double bank_q;
    int delay; /* lookahead budget in samples */
} rs_frontend_config;

RS_API void rs_frontend_config_defaults(rs_frontend_config* cfg);

typedef struct rs_feature_config {
    double hysteresis;  /* comparator dead band, 0.3..0.5 */
    double startup_rpm; /* expected speed at stream start; seeds the period tracker */
    int extended;       /* 0: the seven core features; 1: plus two extras */
} rs_feature_config;

RS_API void rs_feature_config_defaults(rs_feature_config* cfg);

typedef struct rs_detector_config {
    int pulse_revolution;
    int num_pulse_mean; /* inter-pulse distances averaged per speed output */
} rs_detector_config;

RS_API void rs_detector_config_defaults(rs_detector_config* cfg);

typedef enum rs_kernel_kind {
    RS_KERNEL_LINEAR = 0,
    RS_KERNEL_POLYNOMIAL = 1,
    RS_KERNEL_RBF = 2,
    RS_KERNEL_SIGMOID = 3,
} rs_kernel_kind;

typedef struct rs_svm_config {
    rs_kernel_kind kernel;
    int degree;   /* polynomial, 1..4 */
    double sigma; /* RBF */
    double gamma; /* sigmoid */
    double coef0; /* sigmoid */
    double c;
    double tol;
    int max_passes;
} rs_svm_config;

RS_API void rs_svm_config_defaults(rs_svm_config* cfg);

/* ------------------------------------------------------------------- model */

typedef struct rs_model rs_model;

RS_API rs_status rs_model_load(const char* path, rs_model** out);
RS_API rs_status rs_model_save(const rs_model* model, const char* path);
RS_API void rs_model_free(rs_model* model);
RS_API int rs_model_dim(const rs_model* model);
RS_API size_t rs_model_num_sv(const rs_model* model);
RS_API rs_status rs_model_decide(const rs_model* model, const double* features, size_t dim,
                                 int* out_label, double* out_value);

/* ---------------------------------------------------------------- pipeline */

typedef struct rs_estimate {
    int64_t sample_index;
    int pulse;
    int has_speed;
    double speed_rpm;
    double position_rad;
} rs_estimate;

typedef struct rs_pipeline rs_pipeline;

RS_API rs_status rs_pipeline_create(const rs_model* model, const rs_frontend_config* frontend,
                                    const rs_feature_config* features,
                                    const rs_detector_config* detector, double fs,
                                    rs_pipeline** out);
RS_API void rs_pipeline_free(rs_pipeline* pipeline);
RS_API int rs_pipeline_lag(const rs_pipeline* pipeline);
/* Feed one sample; *has_out is set when an estimate (lagged by rs_pipeline_lag
 * samples, but timestamped at the true sample index) becomes available. */
RS_API rs_status rs_pipeline_push(rs_pipeline* pipeline, double sample, rs_estimate* out,
                                  int* has_out);
/* Feed a whole stream; out must hold at least n records. */
RS_API rs_status rs_pipeline_run(rs_pipeline* pipeline, const double* samples, size_t n,
                                 rs_estimate* out, size_t* out_n);

/* estimates.csv = (sample_index,pulse_flag,speed_rpm,position_rad); speed is
 * blank on rows without an emission. */
RS_API rs_status rs_estimates_save_csv(const rs_estimate* records, size_t n, const char* path);
RS_API rs_status rs_estimates_load_csv(const char* path, rs_estimate** out, size_t* out_n);
RS_API void rs_estimates_free(rs_estimate* records);

/* -------------------------------------------------------------- evaluation */

typedef struct rs_error_summary {
    double mean_true_speed_rpm;
    double mean_abs_err_rpm;
    double mean_rel_err_pct;
    double dev_abs_rpm;
    double dev_rel_pct;
    double mean_abs_pos_err_rad;
    int64_t true_pulses;
    int64_t detected_pulses;
    size_t speed_emissions;
} rs_error_summary;

RS_API rs_status rs_evaluate(const rs_estimate* records, size_t n, const rs_truth* truth,
                             double fs, const rs_detector_config* detector,
                             rs_error_summary* out);
/* errors.csv rows mirror the constant-speed error tables. */
RS_API rs_status rs_errors_save_csv(const rs_error_summary* rows, size_t n, const char* path);

/* --------------------------------------------------------------- baselines */

typedef enum rs_baseline_kind {
    RS_BASELINE_MINMAX_MEAN = 0,
    RS_BASELINE_HIGHPASS_ZERO = 1,
    RS_BASELINE_LOWPASS_DC = 2,
} rs_baseline_kind;

typedef struct rs_baseline_params {
    double expected_rpm;
    int pulse_revolution;
    double window_periods;
    double fc_low_hz;
    double hysteresis_fraction;
} rs_baseline_params;

RS_API void rs_baseline_params_defaults(rs_baseline_params* params);
RS_API rs_status rs_baseline_detect(const rs_stream* stream, rs_baseline_kind kind,
                                    const rs_baseline_params* params, int64_t* out,
                                    size_t capacity, size_t* out_n);

/* ---------------------------------------------------------------- training */

typedef struct rs_end_criterion {
    double max_mean_speed_error_pct;
    double max_position_error_rad;
} rs_end_criterion;

typedef struct rs_trainer_config {
    rs_frontend_config frontend;
    rs_feature_config features;
    rs_detector_config detector;
    rs_svm_config svm;
    int interval_samples; /* harvest window; 0 = four ripple periods */
    int negative_cap_ratio;
    int max_iterations;
    uint64_t seed;
} rs_trainer_config;

RS_API void rs_trainer_config_defaults(rs_trainer_config* cfg);

typedef struct rs_report rs_report;

/* Iterative training over ground-truthed recordings. Each motor[i] describes
 * the machine behind streams[i]/truths[i]. Non-convergence still produces the
 * report and best-so-far model but returns RS_ERR_NO_CONVERGENCE. */
RS_API rs_status rs_train(const rs_stream* const* streams, const rs_truth* const* truths,
                          const rs_motor_spec* motors, size_t n_items,
                          const rs_end_criterion* criterion, const rs_trainer_config* cfg,
                          rs_model** out_model, rs_report** out_report);
RS_API void rs_report_free(rs_report* report);
RS_API int rs_report_converged(const rs_report* report);
RS_API int rs_report_iterations(const rs_report* report);
RS_API const char* rs_report_text(const rs_report* report);

/* The built-in training mix (constant/ramp/step runs, some corrupted). */
RS_API rs_status rs_default_corpus(const rs_motor_spec* motor, double fs, uint64_t seed,
                                   rs_stream*** out_streams, rs_truth*** out_truths,
                                   size_t* out_n);
RS_API void rs_corpus_free(rs_stream** streams, rs_truth** truths, size_t n);

/* ------------------------------------------------------------- calibration */

/* Solve the speed equation for the pulses-per-revolution count on a
 * constant-speed recording with a known speed. */
RS_API rs_status rs_calibrate_ppr(const rs_stream* stream, double known_speed_rpm,
                                  const rs_model* model, const rs_frontend_config* frontend,
                                  const rs_feature_config* features, int* out_ppr);

/* ---------------------------------------------------------------- compare */

typedef struct rs_corruption_event {
    int is_ghost;
    double time_s;
} rs_corruption_event;

/* manifest.csv = (kind,time_s) with kind in {false, ghost}. */
RS_API rs_status rs_manifest_save_csv(const rs_corruption_event* events, size_t n,
                                      const char* path);
RS_API rs_status rs_manifest_load_csv(const char* path, rs_corruption_event** out, size_t* out_n);
RS_API void rs_manifest_free(rs_corruption_event* events);

/* Run the SVM detector (when model != NULL) and the three comparator
 * baselines over one stream, score pulse counts against ground truth and each
 * manifest event, and write comparison.csv. */
RS_API rs_status rs_compare(const rs_stream* stream, const rs_truth* truth, const rs_model* model,
                            const rs_frontend_config* frontend, const rs_feature_config* features,
                            const rs_detector_config* detector,
                            const rs_corruption_event* events, size_t n_events,
                            const rs_baseline_params* baseline_params, const char* out_csv_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RIPPLESENSE_H */
