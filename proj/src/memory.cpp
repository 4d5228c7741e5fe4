#include "mlcil/memory.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "mlcil/errors.hpp"
#include "mlcil/kernels.hpp"

namespace mlcil {

MemoryBuffer::MemoryBuffer(std::size_t class_count, std::size_t per_class)
    : per_class_(per_class), reservoirs_(class_count), stream_counts_(class_count, 0) {}

void MemoryBuffer::release(std::uint64_t sequence) {
    auto it = entries_.find(sequence);
    if (it != entries_.end() && --it->second.references == 0) entries_.erase(it);
}

void MemoryBuffer::reservoir_update(MemorySample sample, std::span<const std::size_t> current_classes,
                                    std::mt19937_64& rng) {
    if (sample.labels.size() != reservoirs_.size()) {
        throw ShapeError("reservoir_update: sample has " + std::to_string(sample.labels.size()) +
                         " labels, buffer tracks " + std::to_string(reservoirs_.size()) + " classes");
    }
    sample.sequence = next_sequence_++;
    std::size_t references = 0;
    for (std::size_t c : current_classes) {
        if (!sample.labels.positive(c)) continue;
        const std::uint64_t seen = ++stream_counts_[c];
        if (per_class_ == 0) continue;
        auto& slots = reservoirs_[c];
        if (slots.size() < per_class_) {
            slots.push_back(sample.sequence);
            ++references;
            continue;
        }
        const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, seen - 1)(rng);
        if (j < per_class_) {
            release(slots[j]);
            slots[j] = sample.sequence;
            ++references;
        }
    }
    if (references > 0) {
        const std::uint64_t seq = sample.sequence;
        entries_.emplace(seq, Entry{std::move(sample), references});
    }
}

void MemoryBuffer::relabel(const ModelSnapshot* past, const ClassifierModel& current, const TaskSchedule& schedule,
                           std::size_t t, double threshold) {
    if (entries_.empty() || t <= 1) return;
    const ClassSet& new_classes = schedule.task_classes(t);
    const ClassSet old_classes = schedule.classes_before(t);

    std::vector<Entry*> older;
    std::vector<Entry*> newest;
    for (auto& [seq, entry] : entries_) {
        if (entry.sample.source_task < t) {
            older.push_back(&entry);
        } else if (entry.sample.source_task == t) {
            newest.push_back(&entry);
        } else {
            throw ProtocolError("relabel at task " + std::to_string(t) + " found a sample from future task " +
                                std::to_string(entry.sample.source_task));
        }
    }
    if (!newest.empty() && !old_classes.empty() && past == nullptr) {
        throw ProtocolError("relabel at task " + std::to_string(t) +
                            ": old classes need relabeling but no past model was supplied");
    }

    auto fill = [&](const std::vector<Entry*>& group, const ClassifierModel& model, const ClassSet& classes) {
        if (group.empty() || classes.empty()) return;
        Matrix inputs(group.size(), model.input_dim());
        for (std::size_t i = 0; i < group.size(); ++i) {
            const auto& x = group[i]->sample.features;
            std::copy(x.begin(), x.end(), inputs.row(i).begin());
        }
        const Matrix probs = kernels::forward_batch(model, inputs);
        for (std::size_t i = 0; i < group.size(); ++i) {
            auto& labels = group[i]->sample.labels;
            for (std::size_t c : classes) {
                if (labels.annotated(c)) continue;
                labels.set(c, probs(i, c) > threshold ? Label::positive : Label::negative);
            }
        }
    };
    fill(older, current, new_classes);
    if (past != nullptr) fill(newest, past->model(), old_classes);
}

std::optional<std::vector<const MemorySample*>> MemoryBuffer::sample_replay(std::size_t batch_size,
                                                                            std::mt19937_64& rng) const {
    if (entries_.empty()) return std::nullopt;
    const auto stored = samples();
    std::uniform_int_distribution<std::size_t> pick(0, stored.size() - 1);
    std::vector<const MemorySample*> batch(batch_size);
    for (auto& s : batch) s = stored[pick(rng)];
    return batch;
}

std::vector<const MemorySample*> MemoryBuffer::samples() const {
    std::vector<const MemorySample*> out;
    out.reserve(entries_.size());
    for (const auto& [seq, entry] : entries_) out.push_back(&entry.sample);
    return out;
}

void MemoryBuffer::dump_csv(const std::filesystem::path& path, std::span<const std::string> class_names) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write buffer dump " + path.string());
    const auto stored = samples();
    const std::size_t d = stored.empty() ? 0 : stored.front()->features.size();
    bool first = true;
    auto separator = [&] {
        if (!first) out << ',';
        first = false;
    };
    for (std::size_t i = 0; i < d; ++i) {
        separator();
        out << 'f' << i;
    }
    for (const auto& name : class_names) {
        separator();
        out << "class:" << name;
    }
    out << '\n';
    char buf[64];
    for (const MemorySample* s : stored) {
        for (std::size_t i = 0; i < s->features.size(); ++i) {
            auto res = std::to_chars(buf, buf + sizeof buf, s->features[i]);
            if (i) out << ',';
            out.write(buf, res.ptr - buf);
        }
        for (std::size_t c = 0; c < s->labels.size(); ++c) {
            const Label l = s->labels[c];
            out << ',' << (l == Label::missing ? "?" : l == Label::positive ? "1" : "0");
        }
        out << '\n';
    }
}

}  // namespace mlcil
