#include "mlcil/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mlcil/errors.hpp"
#include "mlcil/kernels.hpp"

namespace mlcil {

double f1_score(const ConfusionCounts& k) {
    const double precision = k.tp + k.fp == 0 ? 0.0 : static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
    const double recall = k.tp + k.fn == 0 ? 0.0 : static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> relevance) {
    if (scores.size() != relevance.size()) throw ShapeError("average_precision: score/relevance length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (relevance[order[rank]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    if (hits == 0) throw EvaluationError("average_precision: no relevant items");
    return sum / static_cast<double>(hits);
}

std::vector<ConfusionCounts> confusion_counts(const Matrix& probs, const LabelMatrix& labels,
                                              std::span<const std::size_t> label_space, double threshold) {
    std::vector<ConfusionCounts> counts(label_space.size());
    for (std::size_t k = 0; k < label_space.size(); ++k) {
        const std::size_t c = label_space[k];
        auto& cc = counts[k];
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            const bool predicted = probs(r, c) > threshold;
            const bool actual = labels(r, c) == 1;
            if (predicted && actual) ++cc.tp;
            else if (predicted) ++cc.fp;
            else if (actual) ++cc.fn;
            else ++cc.tn;
        }
    }
    return counts;
}

MetricsRow evaluate_predictions(const Matrix& probs, const LabelMatrix& labels,
                                std::span<const std::size_t> label_space, double threshold) {
    if (probs.rows() == 0) throw EvaluationError("evaluate: empty test set");
    if (labels.rows() != probs.rows() || labels.cols() != probs.cols()) {
        throw ShapeError("evaluate: prediction and label matrices differ in shape");
    }
    if (label_space.empty()) throw EvaluationError("evaluate: empty label space");

    const std::size_t n_classes = label_space.size();
    std::vector<double> ap(n_classes, 0.0);
    std::vector<std::uint8_t> has_positive(n_classes, 0);
    const auto n = static_cast<std::ptrdiff_t>(n_classes);
#pragma omp parallel
    {
        std::vector<double> scores(probs.rows());
        std::vector<std::uint8_t> relevance(probs.rows());
#pragma omp for schedule(static)
        for (std::ptrdiff_t k = 0; k < n; ++k) {
            const std::size_t c = label_space[static_cast<std::size_t>(k)];
            std::uint8_t any = 0;
            for (std::size_t r = 0; r < probs.rows(); ++r) {
                scores[r] = probs(r, c);
                relevance[r] = labels(r, c);
                any |= relevance[r];
            }
            if (any) {
                ap[static_cast<std::size_t>(k)] = average_precision(scores, relevance);
                has_positive[static_cast<std::size_t>(k)] = 1;
            }
        }
    }

    MetricsRow row;
    row.label_space = n_classes;
    double ap_sum = 0.0;
    std::size_t ap_classes = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
        if (has_positive[k]) {
            ap_sum += ap[k];
            ++ap_classes;
        }
    }
    if (ap_classes == 0) throw EvaluationError("evaluate: no class in the label space has a positive test label");
    row.map = ap_sum / static_cast<double>(ap_classes);

    const auto counts = confusion_counts(probs, labels, label_space, threshold);
    ConfusionCounts pooled;
    double f1_sum = 0.0;
    for (const auto& cc : counts) {
        f1_sum += f1_score(cc);
        pooled.tp += cc.tp;
        pooled.fp += cc.fp;
        pooled.fn += cc.fn;
        pooled.tn += cc.tn;
    }
    row.cf1 = f1_sum / static_cast<double>(n_classes);
    row.of1 = f1_score(pooled);
    row.fpr = pooled.fp + pooled.tn == 0
                  ? 0.0
                  : static_cast<double>(pooled.fp) / static_cast<double>(pooled.fp + pooled.tn);
    return row;
}

MetricsRow evaluate(const ClassifierModel& model, const Dataset& test, std::span<const std::size_t> rows,
                    std::span<const std::size_t> label_space, double threshold) {
    if (rows.empty()) throw EvaluationError("evaluate: empty test set");
    Matrix inputs(rows.size(), test.feature_dim());
    LabelMatrix labels(rows.size(), test.class_count());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto x = test.features.row(rows[i]);
        std::copy(x.begin(), x.end(), inputs.row(i).begin());
        const auto y = test.labels.row(rows[i]);
        for (std::size_t c = 0; c < y.size(); ++c) labels(i, c) = y[c];
    }
    return evaluate_predictions(kernels::forward_batch(model, inputs), labels, label_space, threshold);
}

MetricsReport aggregate(std::vector<MetricsRow> rows) {
    if (rows.empty()) throw EvaluationError("aggregate: no metric rows");
    MetricsReport report;
    double sum = 0.0;
    for (const auto& r : rows) sum += r.map;
    report.avg_map = sum / static_cast<double>(rows.size());
    report.last = rows.back();
    report.rows = std::move(rows);
    return report;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "task,mAP,CF1,OF1,FPR\n";
    char buf[160];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f,%.4f\n", r.task, 100.0 * r.map, 100.0 * r.cf1,
                      100.0 * r.of1, 100.0 * r.fpr);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mlcil
