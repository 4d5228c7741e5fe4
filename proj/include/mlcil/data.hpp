#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mlcil/labels.hpp"
#include "mlcil/matrix.hpp"

namespace mlcil {

enum class Split { train, test };

// N x C matrix of 0/1 ground-truth labels.
class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::uint8_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::uint8_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const std::uint8_t> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

struct Dataset {
    Matrix features;
    LabelMatrix labels;
    std::vector<std::string> class_names;
    Split split = Split::train;

    std::size_t size() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t class_count() const { return class_names.size(); }

    // Shapes agree, every row has a positive, class names are unique.
    // Throws DataError.
    void validate() const;
};

struct Scenario {
    std::size_t base = 0;
    std::size_t increment = 1;
};

// Accepts "B4-C2", "B4C2", "b0-c5".
Scenario parse_scenario(const std::string& text);

// Ordered partition of the output units into tasks, assigned over the class
// names in lexicographic order. Tasks are numbered from 1.
class TaskSchedule {
public:
    TaskSchedule(Scenario scenario, std::vector<ClassSet> tasks, std::size_t class_count);

    std::size_t task_count() const { return tasks_.size(); }
    std::size_t class_count() const { return class_count_; }
    Scenario scenario() const { return scenario_; }

    const ClassSet& task_classes(std::size_t t) const;
    // C^{1:t}; classes_up_to(0) is empty.
    ClassSet classes_up_to(std::size_t t) const;
    // C^{1:t-1}
    ClassSet classes_before(std::size_t t) const { return classes_up_to(t - 1); }
    // Task that owns output unit c.
    std::size_t task_of(std::size_t c) const;

private:
    Scenario scenario_;
    std::vector<ClassSet> tasks_;
    std::size_t class_count_;
};

// Throws ScheduleError when (C - x) is not a multiple of y, y == 0 or x > C.
// x == 0 gives a first task of y classes.
TaskSchedule build_schedule(std::size_t base, std::size_t increment, std::span<const std::string> class_names);

// Classes in task_classes keep their 0/1 value; every other class is missing.
TriStateLabelVector mask_labels(std::span<const std::uint8_t> full_labels, std::span<const std::size_t> task_classes);

// Fully annotated label vector.
TriStateLabelVector full_labels(std::span<const std::uint8_t> labels);

// Rows with at least one positive label inside `classes`.
std::vector<std::size_t> rows_with_positive(const Dataset& data, std::span<const std::size_t> classes);

struct SynthSpec {
    std::size_t classes = 12;
    std::size_t feature_dim = 32;
    std::size_t prototypes_per_class = 1;
    // Probability that class c + C/2 copies the label of class c.
    double cooccurrence = 0.5;
    // Share of prototype variance common to classes c and c + C/2.
    double prototype_overlap = 0.0;
    double noise = 0.5;
    // Independent per-class positive rate before coupling.
    double label_rate = 0.2;
    // Keep at most this many positives per sample (0 = no cap).
    std::size_t max_positives = 0;
    std::size_t train_samples = 2000;
    std::size_t test_samples = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitDatasets {
    Dataset train;
    Dataset test;
};

// Features are the sum of one prototype per positive class plus Gaussian
// noise. Deterministic in spec.seed.
SplitDatasets synth_dataset(const SynthSpec& spec);

// CSV contract: header `f0,...,f{d-1},class:<name>,...`; one sample per row;
// label cells exactly 0 or 1. Throws DataError with line/column context.
Dataset load_dataset(const std::filesystem::path& path, Split split = Split::train);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

}  // namespace mlcil
