#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Deliberately written with explicit loops and no calls
// into the library's metric or memory code paths.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mlcil/data.hpp"
#include "mlcil/labels.hpp"
#include "mlcil/matrix.hpp"
#include "mlcil/memory.hpp"
#include "mlcil/metrics.hpp"

namespace oracle {

// Rank of item i: 1 + items with a higher score, or an equal score and a
// smaller index.
inline double brute_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& rel) {
    const std::size_t n = s.size();
    double sum = 0.0;
    int relevant = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!rel[i]) continue;
        ++relevant;
        std::size_t rank = 1, hits_above = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool above = s[j] > s[i] || (s[j] == s[i] && j < i);
            if (above) {
                ++rank;
                if (rel[j]) ++hits_above;
            }
        }
        sum += static_cast<double>(hits_above) / static_cast<double>(rank);
    }
    return sum / relevant;
}

struct Reference {
    double map = 0.0, cf1 = 0.0, of1 = 0.0, fpr = 0.0;
    std::vector<mlcil::ConfusionCounts> counts;
};

inline double f1(double tp, double fp, double fn) {
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

inline Reference brute_evaluate(const mlcil::Matrix& probs, const mlcil::LabelMatrix& labels,
                                const std::vector<std::size_t>& space, double thr) {
    Reference ref;
    double ap_sum = 0.0, tp = 0, fp = 0, fn = 0, tn = 0;
    int ap_n = 0;
    for (std::size_t c : space) {
        mlcil::ConfusionCounts k;
        std::vector<double> s;
        std::vector<std::uint8_t> rel;
        bool any = false;
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            const bool pred = probs(r, c) > thr;
            const bool act = labels(r, c) == 1;
            k.tp += pred && act;
            k.fp += pred && !act;
            k.fn += !pred && act;
            k.tn += !pred && !act;
            s.push_back(probs(r, c));
            rel.push_back(labels(r, c));
            any = any || act;
        }
        if (any) {
            ap_sum += brute_ap(s, rel);
            ++ap_n;
        }
        ref.cf1 += f1(k.tp, k.fp, k.fn);
        tp += k.tp;
        fp += k.fp;
        fn += k.fn;
        tn += k.tn;
        ref.counts.push_back(k);
    }
    ref.map = ap_sum / ap_n;
    ref.cf1 /= static_cast<double>(space.size());
    ref.of1 = f1(tp, fp, fn);
    ref.fpr = fp + tn > 0 ? fp / (fp + tn) : 0.0;
    return ref;
}

// Random instance with N <= 10 rows, C <= 5 classes, at least one positive
// somewhere in the label space. Scores are drawn from a small grid so ties
// and exact-threshold values occur.
struct Instance {
    mlcil::Matrix probs;
    mlcil::LabelMatrix labels;
    std::vector<std::size_t> space;
};

inline Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> rows(1, 10), cols(1, 5);
    std::uniform_int_distribution<int> grid(0, 10);
    std::bernoulli_distribution coin(0.4);
    for (;;) {
        Instance in;
        const std::size_t n = rows(rng), c = cols(rng);
        in.probs = mlcil::Matrix(n, c);
        in.labels = mlcil::LabelMatrix(n, c);
        for (double& v : in.probs.data()) v = grid(rng) / 10.0;
        bool any = false;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = 0; k < c; ++k) {
                in.labels(r, k) = coin(rng);
            }
        }
        for (std::size_t k = 0; k < c; ++k) {
            if (coin(rng) || in.space.empty()) in.space.push_back(k);
        }
        for (std::size_t k : in.space) {
            for (std::size_t r = 0; r < n; ++r) any = any || in.labels(r, k);
        }
        if (any) return in;
    }
}

// Streams `stream` single-class positives into a fresh capacity-`capacity`
// reservoir, `trials` times, and counts how often each item survives.
inline std::vector<std::uint32_t> reservoir_inclusions(std::size_t stream, std::size_t capacity, std::size_t trials,
                                                       std::uint64_t seed) {
    std::vector<std::uint32_t> hits(stream, 0);
    std::mt19937_64 rng(seed);
    const std::vector<std::size_t> current{0};
    mlcil::TriStateLabelVector positive(1);
    positive.set(0, mlcil::Label::positive);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        mlcil::MemoryBuffer buffer(1, capacity);
        for (std::size_t i = 0; i < stream; ++i) {
            mlcil::MemorySample s;
            s.labels = positive;
            s.source_task = 1;
            s.source_row = i;
            buffer.reservoir_update(std::move(s), current, rng);
        }
        for (const auto* s : buffer.samples()) ++hits[s->source_row];
    }
    return hits;
}

}  // namespace oracle
