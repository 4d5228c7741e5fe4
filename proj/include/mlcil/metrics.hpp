#pragma once

// Multi-label evaluation conventions used throughout:
//   - AP is non-interpolated: mean over relevant items of precision at the
//     item's rank, ranking by descending score with ties broken by index.
//   - mAP averages AP over classes of the label space with >= 1 positive.
//   - A prediction is positive when its probability is > threshold.
//   - CF1 is the mean per-class F1 (F1 := 0 when P + R == 0); OF1 is F1 of
//     the pooled counts; FPR is pooled FP / (FP + TN).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mlcil/data.hpp"
#include "mlcil/labels.hpp"
#include "mlcil/matrix.hpp"
#include "mlcil/numeric.hpp"

namespace mlcil {

inline constexpr double kDecisionThreshold = 0.5;

struct MetricsRow {
    std::size_t task = 0;
    std::size_t label_space = 0;
    double map = 0.0;
    double cf1 = 0.0;
    double of1 = 0.0;
    double fpr = 0.0;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    MetricsRow last;
    double avg_map = 0.0;
};

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// F1 from counts, 0 when precision + recall == 0.
double f1_score(const ConfusionCounts& counts);

// Throws EvaluationError when no item is relevant.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> relevance);

// Per-class confusion counts over `label_space` (same order).
std::vector<ConfusionCounts> confusion_counts(const Matrix& probs, const LabelMatrix& labels,
                                              std::span<const std::size_t> label_space, double threshold);

// probs and labels are N x C over all outputs; only label_space columns are scored.
MetricsRow evaluate_predictions(const Matrix& probs, const LabelMatrix& labels,
                                std::span<const std::size_t> label_space, double threshold = kDecisionThreshold);

// Scores the listed rows of the test set. Throws EvaluationError when the
// row list is empty.
MetricsRow evaluate(const ClassifierModel& model, const Dataset& test, std::span<const std::size_t> rows,
                    std::span<const std::size_t> label_space, double threshold = kDecisionThreshold);

// Avg.Acc = mean of row mAPs, Last = final row. Throws EvaluationError when empty.
MetricsReport aggregate(std::vector<MetricsRow> rows);

// `task,mAP,CF1,OF1,FPR` with values in percent, four decimals.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace mlcil
