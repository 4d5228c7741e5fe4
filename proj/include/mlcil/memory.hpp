#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlcil/data.hpp"
#include "mlcil/labels.hpp"
#include "mlcil/numeric.hpp"

namespace mlcil {

struct MemorySample {
    std::vector<double> features;
    TriStateLabelVector labels;
    std::size_t source_task = 0;
    // Row of the sample in its training set; kept for audits.
    std::size_t source_row = 0;
    // Assigned by the buffer when the sample is offered.
    std::uint64_t sequence = 0;
};

// Class-balanced replay memory: one reservoir of `per_class` slots for every
// output unit. A sample that is positive for several current classes may sit
// in several reservoirs but is stored once.
class MemoryBuffer {
public:
    MemoryBuffer(std::size_t class_count, std::size_t per_class);

    // Offers the sample to the reservoir of every class in `current_classes`
    // it is annotated positive for (Algorithm R per class).
    void reservoir_update(MemorySample sample, std::span<const std::size_t> current_classes,
                          std::mt19937_64& rng);

    // Online relabeling after task t finished training. Missing labels of
    // C^t on samples from earlier tasks come from `current`; missing labels
    // of C^{1:t-1} on samples from task t come from `past`. A label becomes
    // positive iff the probability is strictly greater than `threshold`.
    // Annotations that already exist are never changed.
    void relabel(const ModelSnapshot* past, const ClassifierModel& current, const TaskSchedule& schedule,
                 std::size_t t, double threshold);

    // Uniform draws with replacement over the distinct stored samples.
    // Returns nullopt when the buffer is empty.
    std::optional<std::vector<const MemorySample*>> sample_replay(std::size_t batch_size,
                                                                  std::mt19937_64& rng) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t per_class() const { return per_class_; }
    std::size_t class_count() const { return reservoirs_.size(); }
    std::size_t reservoir_size(std::size_t c) const { return reservoirs_.at(c).size(); }
    std::uint64_t stream_count(std::size_t c) const { return stream_counts_.at(c); }
    // Sequence numbers held by the reservoir of class c.
    std::span<const std::uint64_t> reservoir(std::size_t c) const { return reservoirs_.at(c); }

    // Stored samples ordered by sequence number.
    std::vector<const MemorySample*> samples() const;

    // Dataset-style CSV with `?` for missing labels.
    void dump_csv(const std::filesystem::path& path, std::span<const std::string> class_names) const;

private:
    struct Entry {
        MemorySample sample;
        std::size_t references = 0;
    };

    void release(std::uint64_t sequence);

    std::size_t per_class_;
    std::vector<std::vector<std::uint64_t>> reservoirs_;
    std::vector<std::uint64_t> stream_counts_;
    std::map<std::uint64_t, Entry> entries_;
    std::uint64_t next_sequence_ = 0;
};

}  // namespace mlcil
