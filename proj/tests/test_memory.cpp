#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mlcil/errors.hpp"
#include "mlcil/memory.hpp"
#include "oracles.hpp"

using namespace mlcil;

namespace {

MemorySample sample(std::vector<double> x, const TriStateLabelVector& y, std::size_t task, std::size_t row = 0) {
    MemorySample s;
    s.features = std::move(x);
    s.labels = y;
    s.source_task = task;
    s.source_row = row;
    return s;
}

// Model whose output c is logistic(b2[c]) for every input.
ClassifierModel constant_model(std::size_t inputs, const std::vector<double>& logits) {
    ClassifierModel m(inputs, 1, logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) m.parameters()[m.b2_offset() + c] = logits[c];
    return m;
}

TaskSchedule four_classes() {
    const std::vector<std::string> names{"a", "b", "c", "d"};
    return build_schedule(2, 2, names);
}

}  // namespace

TEST_CASE("reservoir fills below capacity and never exceeds it") {
    MemoryBuffer buf(4, 3);
    std::mt19937_64 rng(1);
    const ClassSet current{0, 1};
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < 500; ++i) {
        TriStateLabelVector y(4);
        y.set(0, coin(rng) ? Label::positive : Label::negative);
        y.set(1, coin(rng) ? Label::positive : Label::negative);
        const bool any = y.positive(0) || y.positive(1);
        const std::size_t before = buf.reservoir_size(0) + buf.reservoir_size(1);
        buf.reservoir_update(sample({0.0}, y, 1, i), current, rng);
        if (any && before < 6 && i < 2) CHECK(buf.size() >= 1);
        for (std::size_t c = 0; c < 4; ++c) CHECK(buf.reservoir_size(c) <= 3);
        CHECK(buf.size() <= 3 * 2);
    }
    CHECK(buf.reservoir_size(0) == 3);
    CHECK(buf.reservoir_size(2) == 0);
    for (const auto* s : buf.samples()) CHECK(s->labels.annotated_classes() == ClassSet{0, 1});
}

TEST_CASE("first items are always inserted") {
    MemoryBuffer buf(1, 2);
    std::mt19937_64 rng(2);
    TriStateLabelVector y(1);
    y.set(0, Label::positive);
    buf.reservoir_update(sample({1.0}, y, 1, 0), ClassSet{0}, rng);
    CHECK(buf.size() == 1);
    buf.reservoir_update(sample({2.0}, y, 1, 1), ClassSet{0}, rng);
    CHECK(buf.size() == 2);
    CHECK(buf.stream_count(0) == 2);
}

TEST_CASE("a sample positive for two classes is stored once") {
    MemoryBuffer buf(2, 1);
    std::mt19937_64 rng(3);
    TriStateLabelVector y(2);
    y.set(0, Label::positive);
    y.set(1, Label::positive);
    buf.reservoir_update(sample({1.0}, y, 1), ClassSet{0, 1}, rng);
    CHECK(buf.size() == 1);
    CHECK(buf.reservoir(0)[0] == buf.reservoir(1)[0]);
    const auto replay = buf.sample_replay(10, rng);
    REQUIRE(replay);
    for (const auto* s : *replay) CHECK(s == buf.samples()[0]);
}

TEST_CASE("per_class 0 stores nothing") {
    MemoryBuffer buf(2, 0);
    std::mt19937_64 rng(4);
    TriStateLabelVector y(2);
    y.set(0, Label::positive);
    y.set(1, Label::negative);
    for (int i = 0; i < 50; ++i) buf.reservoir_update(sample({1.0}, y, 1), ClassSet{0, 1}, rng);
    CHECK(buf.empty());
    CHECK(buf.stream_count(0) == 50);
    CHECK_FALSE(buf.sample_replay(4, rng).has_value());
}

TEST_CASE("reservoir shape mismatch") {
    MemoryBuffer buf(3, 1);
    std::mt19937_64 rng(5);
    CHECK_THROWS_AS(buf.reservoir_update(sample({1.0}, TriStateLabelVector(2), 1), ClassSet{0}, rng), ShapeError);
}

TEST_CASE("inclusion probability of a 1000-item stream into 2 slots") {
    const std::size_t trials = 10000, stream = 1000, cap = 2;
    const auto hits = oracle::reservoir_inclusions(stream, cap, trials, 2024);
    const double p = static_cast<double>(cap) / stream;
    const double mean = trials * p;
    const double sigma = std::sqrt(trials * p * (1 - p));
    std::size_t outside = 0;
    double total = 0.0;
    for (auto h : hits) {
        outside += std::abs(h - mean) > 3 * sigma;
        total += h;
    }
    CHECK(total == trials * cap);
    for (std::size_t probe : {0u, 1u, 2u, 499u, 998u, 999u}) {
        CHECK_MESSAGE(std::abs(hits[probe] - mean) <= 3 * sigma, "item ", probe, " hits ", hits[probe]);
    }
    CHECK(outside <= 10);
}

TEST_CASE("relabel fills only the missing blocks") {
    const auto sched = four_classes();  // task 1 = {0,1}, task 2 = {2,3}
    MemoryBuffer buf(4, 5);
    std::mt19937_64 rng(6);
    TriStateLabelVector old_y(4);
    old_y.set(0, Label::positive);
    old_y.set(1, Label::negative);
    buf.reservoir_update(sample({0.0}, old_y, 1, 0), sched.task_classes(1), rng);
    TriStateLabelVector new_y(4);
    new_y.set(2, Label::positive);
    new_y.set(3, Label::negative);

    // past says class 0 > 0.5 and class 1 < 0.5; current says 2 < 0.5, 3 > 0.5
    const auto past = snapshot(constant_model(1, {2.0, -2.0, 5.0, 5.0}), 1);
    const auto current = constant_model(1, {-5.0, 5.0, -3.0, 3.0});

    buf.relabel(nullptr, current, sched, 1, 0.5);
    CHECK(buf.samples()[0]->labels == old_y);

    buf.reservoir_update(sample({0.0}, new_y, 2, 1), sched.task_classes(2), rng);
    buf.relabel(&past, current, sched, 2, 0.5);
    const auto stored = buf.samples();
    REQUIRE(stored.size() == 2);
    const auto& a = stored[0]->labels;
    const auto& b = stored[1]->labels;
    // insertion-time labels unchanged
    CHECK(a[0] == Label::positive);
    CHECK(a[1] == Label::negative);
    CHECK(b[2] == Label::positive);
    CHECK(b[3] == Label::negative);
    // new classes on the old sample from the current model
    CHECK(a[2] == Label::negative);
    CHECK(a[3] == Label::positive);
    // old classes on the new sample from the past model
    CHECK(b[0] == Label::positive);
    CHECK(b[1] == Label::negative);
    for (const auto* s : stored) CHECK(s->labels.covers(sched.classes_up_to(2)));
}

TEST_CASE("relabel threshold is strict") {
    const auto sched = four_classes();
    MemoryBuffer buf(4, 5);
    std::mt19937_64 rng(7);
    TriStateLabelVector y(4);
    y.set(0, Label::positive);
    y.set(1, Label::negative);
    buf.reservoir_update(sample({0.0}, y, 1), sched.task_classes(1), rng);
    buf.relabel(nullptr, constant_model(1, {0.0, 0.0, 0.0, 0.0}), sched, 2, 0.5);
    CHECK(buf.samples()[0]->labels[2] == Label::negative);
    CHECK(buf.samples()[0]->labels[3] == Label::negative);
}

TEST_CASE("relabel without a past model when old classes need it") {
    const auto sched = four_classes();
    MemoryBuffer buf(4, 5);
    std::mt19937_64 rng(8);
    TriStateLabelVector y(4);
    y.set(2, Label::positive);
    y.set(3, Label::negative);
    buf.reservoir_update(sample({0.0}, y, 2), sched.task_classes(2), rng);
    CHECK_THROWS_AS(buf.relabel(nullptr, constant_model(1, {0, 0, 0, 0}), sched, 2, 0.5), ProtocolError);
}

TEST_CASE("replay draws uniformly with replacement") {
    MemoryBuffer buf(5, 1);
    std::mt19937_64 rng(9);
    for (std::size_t c = 0; c < 5; ++c) {
        TriStateLabelVector y(5);
        for (std::size_t k = 0; k < 5; ++k) y.set(k, k == c ? Label::positive : Label::negative);
        buf.reservoir_update(sample({double(c)}, y, 1, c), ClassSet{0, 1, 2, 3, 4}, rng);
    }
    REQUIRE(buf.size() == 5);
    std::map<const MemorySample*, int> freq;
    const int draws = 10000;
    const auto batch = buf.sample_replay(draws, rng);
    REQUIRE(batch);
    CHECK(batch->size() == static_cast<std::size_t>(draws));
    for (const auto* s : *batch) ++freq[s];
    const double mean = draws / 5.0, sigma = std::sqrt(draws * 0.2 * 0.8);
    for (const auto& [s, n] : freq) CHECK(std::abs(n - mean) <= 3 * sigma);

    MemoryBuffer single(1, 1);
    TriStateLabelVector y(1);
    y.set(0, Label::positive);
    single.reservoir_update(sample({1.0}, y, 1), ClassSet{0}, rng);
    const auto four = single.sample_replay(4, rng);
    REQUIRE(four);
    CHECK(four->size() == 4);
    for (const auto* s : *four) CHECK(s == single.samples()[0]);
}

TEST_CASE("buffer dump marks missing labels") {
    MemoryBuffer buf(3, 1);
    std::mt19937_64 rng(10);
    TriStateLabelVector y(3);
    y.set(0, Label::positive);
    y.set(1, Label::negative);
    buf.reservoir_update(sample({0.5, -1.0}, y, 1), ClassSet{0, 1}, rng);
    const auto path = std::filesystem::temp_directory_path() / "mlcil_test_dump.csv";
    const std::vector<std::string> names{"a", "b", "c"};
    buf.dump_csv(path, names);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header.find("class:c") != std::string::npos);
    CHECK(row.substr(row.size() - 6) == ",1,0,?");
}
