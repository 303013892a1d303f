#pragma once

#include <string>
#include <vector>

#include "core/detector.hpp"
#include "core/trainer.hpp"
#include "core/types.hpp"

namespace ripple {

// File formats. All CSVs carry a mandatory header row, comma delimiters and
// full-precision (%.17g) numbers, so simulate -> load round-trips are lossless.

void save_stream_csv(const SampleStream& stream, const std::string& path);
SampleStream load_stream_csv(const std::string& path);

void save_truth_csv(const GroundTruth& truth, const std::string& path);
GroundTruth load_truth_csv(const std::string& path);

void save_estimates_csv(const std::vector<EstimateRecord>& records, const std::string& path);
std::vector<EstimateRecord> load_estimates_csv(const std::string& path);

void save_errors_csv(const std::vector<StreamEval>& rows, const std::string& path);

struct CorruptionEvent {
    bool ghost = false;  // false pulse otherwise
    double time_s = 0.0;
};

void save_manifest_csv(const std::vector<CorruptionEvent>& events, const std::string& path);
std::vector<CorruptionEvent> load_manifest_csv(const std::string& path);

struct ComparisonEventRow {
    std::string method;
    CorruptionEvent event;
    std::string outcome;  // discarded/accepted for false, detected/missed for ghost
};

struct ComparisonSummaryRow {
    std::string method;
    std::int64_t detected = 0;
    std::int64_t truth = 0;
    std::int64_t count_error = 0;
};

struct ComparisonTable {
    std::vector<ComparisonSummaryRow> summaries;
    std::vector<ComparisonEventRow> events;
};

void save_comparison_csv(const ComparisonTable& table, const std::string& path);

}  // namespace ripple
