#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mlcil {

// Sorted, duplicate-free list of output-unit indices.
using ClassSet = std::vector<std::size_t>;

enum class Label : std::int8_t { missing = -1, negative = 0, positive = 1 };

// Per-class annotation under task-level partial labels. The annotated-class
// set is derived from the values, so "non-missing iff annotated" holds by
// construction.
class TriStateLabelVector {
public:
    TriStateLabelVector() = default;
    explicit TriStateLabelVector(std::size_t classes) : values_(classes, Label::missing) {}

    std::size_t size() const { return values_.size(); }
    Label operator[](std::size_t c) const { return values_[c]; }
    void set(std::size_t c, Label value) { values_[c] = value; }

    bool annotated(std::size_t c) const { return values_[c] != Label::missing; }
    bool positive(std::size_t c) const { return values_[c] == Label::positive; }

    ClassSet annotated_classes() const {
        ClassSet out;
        for (std::size_t c = 0; c < values_.size(); ++c) {
            if (annotated(c)) out.push_back(c);
        }
        return out;
    }

    bool covers(std::span<const std::size_t> classes) const {
        for (std::size_t c : classes) {
            if (!annotated(c)) return false;
        }
        return true;
    }

    friend bool operator==(const TriStateLabelVector&, const TriStateLabelVector&) = default;

private:
    std::vector<Label> values_;
};

}  // namespace mlcil
