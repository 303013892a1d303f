#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core/detector.hpp"
#include "core/sim.hpp"
#include "core/svm.hpp"
#include "core/types.hpp"

namespace ripple {

struct EndCriterion {
    double max_mean_speed_error_pct = 0.75;
    double max_position_error_rad = 3.0;

    void validate() const;
};

struct CorpusItemSpec {
    std::string name;
    MotorSpec motor;
    RippleShape shape;
    SpeedProfile profile;
    CorruptionScript corruption;
};

struct CorpusItem {
    std::string name;
    MotorSpec motor;
    SampleStream stream;
    GroundTruth truth;
};

struct Corpus {
    std::vector<CorpusItem> items;
    std::vector<std::string> warnings;
};

// Deterministically synthesize ground-truthed recordings for every spec.
// Missing profile kinds produce a warning, an empty spec list is an error.
Corpus build_corpus(const std::vector<CorpusItemSpec>& specs, double fs, std::uint64_t seed);

// The reference training mix: constant speeds across the range, ramps, steps,
// and corrupted runs so the classifier sees false and ghost pulses.
std::vector<CorpusItemSpec> default_corpus_specs(const MotorSpec& motor);

struct LabeledSample {
    std::vector<double> features;
    int label;  // +1 pulse, -1 no pulse
    std::uint64_t key;  // (item, sample) identity for dedup
};

struct SampleList {
    std::vector<LabeledSample> samples;
    std::vector<std::uint64_t> keys_sorted;

    bool insert(LabeledSample s);
    std::size_t positives() const;
    void clear();
    std::size_t size() const { return samples.size(); }
};

struct TrainerConfig {
    FrontendConfig frontend;
    FeatureConfig features;       // initial_period is re-seeded per stream
    DetectorConfig detector;
    KernelSpec kernel;
    double c = 10.0;
    double smo_tol = 1e-3;
    int smo_max_passes = 100;
    int interval_samples = 0;     // harvest window; 0 = four ripple periods
    int negative_cap_ratio = 20;  // negatives <= ratio * positives at train time
    int max_iterations = 60;
    std::uint64_t seed = 1;

    void validate() const;
};

// The configuration the shipped models are trained with: wide passband scaled
// to the sampling rate, RBF kernel (polynomial surfaces proved brittle across
// harvest iterations on these features), 16-interval speed averaging.
TrainerConfig reference_trainer_config(double fs);

struct StreamEval {
    std::string name;
    double mean_true_speed_rpm = 0.0;
    double mean_abs_err_rpm = 0.0;
    double mean_rel_err_pct = std::numeric_limits<double>::infinity();
    double dev_abs_rpm = 0.0;
    double dev_rel_pct = std::numeric_limits<double>::infinity();
    double mean_abs_pos_err_rad = std::numeric_limits<double>::infinity();
    std::int64_t true_pulses = 0;
    std::int64_t detected_pulses = 0;
    std::size_t speed_emissions = 0;

    bool meets(const EndCriterion& c) const;
};

// Error metrics of an estimate trace against ground truth. The incremental
// position is aligned to the truth at the first detected pulse (pulse counting
// is relative, like any incremental encoder). A speed emission is the mean
// speed over the averaging window behind it, so it is scored against the truth
// at the window center; fs and num_pulse_mean locate that center.
StreamEval evaluate_records(const std::vector<EstimateRecord>& records, const GroundTruth& truth,
                            int pulse_revolution, double fs, int num_pulse_mean);

// Run the pipeline over every corpus item and score it.
std::vector<StreamEval> evaluate(const SvmModel& model, const Corpus& corpus,
                                 const PipelineConfig& cfg);

struct IterationStat {
    int iteration = 0;
    std::size_t sample_count = 0;
    std::size_t positives = 0;
    double worst_speed_err_pct = 0.0;
    double worst_pos_err_rad = 0.0;
    double hysteresis = 0.0;
    int degree = 0;
    bool trained = false;
};

struct TrainingReport {
    bool converged = false;
    int iterations = 0;
    std::vector<IterationStat> trajectory;
    std::vector<StreamEval> final_eval;
    std::vector<std::string> warnings;
    std::optional<SvmModel> model;
    // the configuration the final model was trained under (the parameter
    // sweep may have moved the hysteresis or kernel degree); pipelines
    // running the model must use these feature settings
    double final_hysteresis = 0.4;
    int final_degree = 3;

    std::string text() const;
};

struct HarvestOutcome {
    std::size_t added = 0;
    bool escalate = false;  // no failing interval / nothing new: change a parameter
};

// Pull one labeled interval out of the corpus: a random pulse-bearing interval
// while S is empty, otherwise a window around the worst remaining failure of
// the current model.
HarvestOutcome harvest_samples(const Corpus& corpus, const std::optional<SvmModel>& model,
                               SampleList& s, const TrainerConfig& cfg, std::uint64_t salt);

// As above, but "failing" is judged against an explicit end criterion: when the
// criterion already holds everywhere and no pulse is missed or spurious, the
// list is left untouched.
HarvestOutcome harvest_samples_with_criterion(const Corpus& corpus,
                                              const std::optional<SvmModel>& model, SampleList& s,
                                              const TrainerConfig& cfg,
                                              const EndCriterion& criterion, std::uint64_t salt);

// The iterative training method: harvest, train, evaluate, repeat until the
// end criterion holds on every stream or the iteration budget runs out.
TrainingReport run_training(const Corpus& corpus, const EndCriterion& criterion,
                            const TrainerConfig& cfg);

// Pipeline configuration for one stream under this trainer, with the period
// tracker seeded from the stream's starting speed.
PipelineConfig pipeline_config_for(const TrainerConfig& cfg, const MotorSpec& motor,
                                   double startup_rpm, double fs);

// Teacher-forced per-sample features and labels for one recording: the pulse
// feedback is driven by ground truth, with each truth index snapped onto the
// conditioned waveform's realized peak. Labels are +1 on the pulse sample,
// 0 (unusable) in a narrow ambiguity band around it, -1 elsewhere.
struct TeacherFeatures {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<std::int64_t> pulse_rows;  // row indices with label +1
};

// `normal` drives the feedback with every true pulse; `recovery` withholds the
// feedback on a deterministic subset so the set also covers the states the
// detector must climb out of after missing pulses.
struct TeacherData {
    TeacherFeatures normal;
    TeacherFeatures recovery;
};
TeacherData teacher_features(const CorpusItem& item, const TrainerConfig& cfg);

}  // namespace ripple
