#include "mlcil/data.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mlcil/errors.hpp"

namespace mlcil {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::string where(const std::filesystem::path& path, std::size_t line, std::size_t column) {
    return path.string() + ":" + std::to_string(line) + " column " + std::to_string(column);
}

}  // namespace

void Dataset::validate() const {
    if (labels.rows() != features.rows()) {
        throw DataError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                        std::to_string(labels.rows()) + " label rows");
    }
    if (labels.cols() != class_names.size()) {
        throw DataError("label matrix width does not match the class-name list");
    }
    std::set<std::string> seen;
    for (const auto& name : class_names) {
        if (!seen.insert(name).second) throw DataError("duplicate class name '" + name + "'");
    }
    std::vector<std::size_t> empty_rows;
    for (std::size_t r = 0; r < labels.rows(); ++r) {
        const auto row = labels.row(r);
        if (std::none_of(row.begin(), row.end(), [](std::uint8_t v) { return v == 1; })) empty_rows.push_back(r);
    }
    if (!empty_rows.empty()) {
        std::string msg = "rows without any positive label:";
        for (std::size_t i = 0; i < empty_rows.size() && i < 20; ++i) msg += " " + std::to_string(empty_rows[i]);
        if (empty_rows.size() > 20) msg += " ...";
        throw DataError(msg);
    }
}

Scenario parse_scenario(const std::string& text) {
    std::string s;
    for (char ch : text) {
        if (ch != '-' && ch != '_' && !std::isspace(static_cast<unsigned char>(ch))) {
            s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        }
    }
    const auto c_pos = s.find('C');
    if (s.empty() || s.front() != 'B' || c_pos == std::string::npos || c_pos < 2 || c_pos + 1 >= s.size()) {
        throw ScheduleError("scenario '" + text + "' is not of the form Bx-Cy");
    }
    Scenario out;
    const char* b_begin = s.data() + 1;
    const char* b_end = s.data() + c_pos;
    const char* c_begin = s.data() + c_pos + 1;
    const char* c_end = s.data() + s.size();
    auto r1 = std::from_chars(b_begin, b_end, out.base);
    auto r2 = std::from_chars(c_begin, c_end, out.increment);
    if (r1.ec != std::errc{} || r1.ptr != b_end || r2.ec != std::errc{} || r2.ptr != c_end) {
        throw ScheduleError("scenario '" + text + "' is not of the form Bx-Cy");
    }
    return out;
}

TaskSchedule::TaskSchedule(Scenario scenario, std::vector<ClassSet> tasks, std::size_t class_count)
    : scenario_(scenario), tasks_(std::move(tasks)), class_count_(class_count) {}

const ClassSet& TaskSchedule::task_classes(std::size_t t) const {
    if (t == 0 || t > tasks_.size()) {
        throw ScheduleError("task index " + std::to_string(t) + " outside 1.." + std::to_string(tasks_.size()));
    }
    return tasks_[t - 1];
}

ClassSet TaskSchedule::classes_up_to(std::size_t t) const {
    if (t > tasks_.size()) {
        throw ScheduleError("task index " + std::to_string(t) + " outside 1.." + std::to_string(tasks_.size()));
    }
    ClassSet out;
    for (std::size_t i = 0; i < t; ++i) out.insert(out.end(), tasks_[i].begin(), tasks_[i].end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t TaskSchedule::task_of(std::size_t c) const {
    for (std::size_t t = 0; t < tasks_.size(); ++t) {
        if (std::binary_search(tasks_[t].begin(), tasks_[t].end(), c)) return t + 1;
    }
    throw ScheduleError("class " + std::to_string(c) + " belongs to no task");
}

TaskSchedule build_schedule(std::size_t base, std::size_t increment, std::span<const std::string> class_names) {
    const std::size_t total = class_names.size();
    if (increment == 0) throw ScheduleError("increment must be >= 1");
    if (base > total) {
        throw ScheduleError("base task of " + std::to_string(base) + " classes exceeds " + std::to_string(total));
    }
    const std::size_t first = base == 0 ? increment : base;
    if (first > total || (total - first) % increment != 0) {
        throw ScheduleError("B" + std::to_string(base) + "-C" + std::to_string(increment) + " does not divide " +
                            std::to_string(total) + " classes");
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return class_names[a] < class_names[b]; });

    std::vector<ClassSet> tasks;
    std::size_t cursor = 0;
    while (cursor < total) {
        const std::size_t size = tasks.empty() ? first : increment;
        ClassSet set(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                     order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
        std::sort(set.begin(), set.end());
        tasks.push_back(std::move(set));
        cursor += size;
    }
    return TaskSchedule(Scenario{base, increment}, std::move(tasks), total);
}

TriStateLabelVector mask_labels(std::span<const std::uint8_t> full, std::span<const std::size_t> task_classes) {
    TriStateLabelVector out(full.size());
    for (std::size_t c : task_classes) {
        if (c >= full.size()) throw ShapeError("mask_labels: class " + std::to_string(c) + " out of range");
        out.set(c, full[c] ? Label::positive : Label::negative);
    }
    return out;
}

TriStateLabelVector full_labels(std::span<const std::uint8_t> labels) {
    TriStateLabelVector out(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) out.set(c, labels[c] ? Label::positive : Label::negative);
    return out;
}

std::vector<std::size_t> rows_with_positive(const Dataset& data, std::span<const std::size_t> classes) {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto row = data.labels.row(r);
        if (std::any_of(classes.begin(), classes.end(), [&](std::size_t c) { return row[c] == 1; })) {
            out.push_back(r);
        }
    }
    return out;
}

void SynthSpec::validate() const {
    if (classes < 2) throw DataError("synthetic spec: classes must be >= 2");
    if (feature_dim < 2) throw DataError("synthetic spec: feature_dim must be >= 2");
    if (prototypes_per_class < 1) throw DataError("synthetic spec: prototypes_per_class must be >= 1");
    if (!(noise >= 0.0)) throw DataError("synthetic spec: noise must be >= 0");
    if (!(cooccurrence >= 0.0 && cooccurrence <= 1.0)) throw DataError("synthetic spec: cooccurrence must lie in [0, 1]");
    if (!(prototype_overlap >= 0.0 && prototype_overlap < 1.0)) {
        throw DataError("synthetic spec: prototype_overlap must lie in [0, 1)");
    }
    if (!(label_rate > 0.0 && label_rate <= 1.0)) throw DataError("synthetic spec: label_rate must lie in (0, 1]");
    if (train_samples == 0 || test_samples == 0) throw DataError("synthetic spec: sample counts must be positive");
}

SplitDatasets synth_dataset(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution draw_positive(spec.label_rate);
    std::bernoulli_distribution couple(spec.cooccurrence);

    const std::size_t C = spec.classes;
    const std::size_t d = spec.feature_dim;
    const std::size_t K = spec.prototypes_per_class;
    Matrix prototypes(C * K, d);
    for (double& v : prototypes.data()) v = gauss(rng);
    const std::size_t half = C / 2;
    if (spec.prototype_overlap > 0.0 && half > 0) {
        Matrix shared(half, d);
        for (double& v : shared.data()) v = gauss(rng);
        const double own = std::sqrt(1.0 - spec.prototype_overlap);
        const double common = std::sqrt(spec.prototype_overlap);
        for (std::size_t row = 0; row < C * K; ++row) {
            const std::size_t c = row / K;
            if (c >= 2 * half) continue;
            const auto g = shared.row(c % half);
            auto p = prototypes.row(row);
            for (std::size_t i = 0; i < d; ++i) p[i] = own * p[i] + common * g[i];
        }
    }

    std::vector<std::string> names(C);
    const int width = C > 99 ? 3 : 2;
    for (std::size_t c = 0; c < C; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "class_%0*zu", width, c);
        names[c] = buf;
    }

    auto make = [&](std::size_t n, Split split) {
        Dataset ds;
        ds.features = Matrix(n, d);
        ds.labels = LabelMatrix(n, C);
        ds.class_names = names;
        ds.split = split;
        std::vector<std::uint8_t> y(C);
        std::vector<std::size_t> positives;
        for (std::size_t r = 0; r < n; ++r) {
            do {
                for (std::size_t c = 0; c < C; ++c) y[c] = draw_positive(rng) ? 1 : 0;
                for (std::size_t c = 0; c < half; ++c) {
                    if (couple(rng)) y[c + half] = y[c];
                }
            } while (std::none_of(y.begin(), y.end(), [](std::uint8_t v) { return v == 1; }));
            positives.clear();
            for (std::size_t c = 0; c < C; ++c) {
                if (y[c]) positives.push_back(c);
            }
            if (spec.max_positives > 0 && positives.size() > spec.max_positives) {
                std::shuffle(positives.begin(), positives.end(), rng);
                positives.resize(spec.max_positives);
                std::fill(y.begin(), y.end(), 0);
                for (std::size_t c : positives) y[c] = 1;
                std::sort(positives.begin(), positives.end());
            }
            auto x = ds.features.row(r);
            for (std::size_t c : positives) {
                ds.labels(r, c) = 1;
                const std::size_t proto = K == 1 ? 0 : std::uniform_int_distribution<std::size_t>(0, K - 1)(rng);
                const auto p = prototypes.row(c * K + proto);
                for (std::size_t i = 0; i < d; ++i) x[i] += p[i];
            }
            if (spec.noise > 0.0) {
                for (std::size_t i = 0; i < d; ++i) x[i] += spec.noise * gauss(rng);
            }
        }
        return ds;
    };

    SplitDatasets out;
    out.train = make(spec.train_samples, Split::train);
    out.test = make(spec.test_samples, Split::test);
    return out;
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file, expected a header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);

    std::size_t d = 0;
    std::vector<std::string> names;
    for (std::size_t col = 0; col < header.size(); ++col) {
        const std::string cell = trim(header[col]);
        if (names.empty() && cell == "f" + std::to_string(d)) {
            ++d;
        } else if (cell.rfind("class:", 0) == 0 && cell.size() > 6) {
            names.push_back(cell.substr(6));
        } else {
            throw DataError("malformed header at " + where(path, 1, col + 1) + ": unexpected '" + cell +
                            "', expected f" + std::to_string(d) + " or class:<name>");
        }
    }
    if (d == 0 || names.empty()) {
        throw DataError("malformed header in " + path.string() + ": need f0.. feature columns and class: columns");
    }

    std::vector<double> feats;
    std::vector<std::uint8_t> labels;
    std::size_t line_no = 1;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != d + names.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(d + names.size()) + " cells, found " + std::to_string(cells.size()));
        }
        for (std::size_t col = 0; col < d; ++col) {
            const std::string cell = trim(cells[col]);
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw DataError("bad feature value '" + cell + "' at " + where(path, line_no, col + 1));
            }
            feats.push_back(v);
        }
        for (std::size_t col = d; col < cells.size(); ++col) {
            const std::string cell = trim(cells[col]);
            if (cell != "0" && cell != "1") {
                throw DataError("label cell '" + cell + "' is not 0 or 1 at " + where(path, line_no, col + 1) +
                                " (class " + names[col - d] + ")");
            }
            labels.push_back(cell == "1" ? 1 : 0);
        }
        ++n;
    }

    Dataset ds;
    ds.features = Matrix(n, d);
    std::copy(feats.begin(), feats.end(), ds.features.data().begin());
    ds.labels = LabelMatrix(n, names.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < names.size(); ++c) ds.labels(r, c) = labels[r * names.size() + c];
    }
    ds.class_names = std::move(names);
    ds.split = split;

    std::set<std::string> seen;
    for (const auto& name : ds.class_names) {
        if (!seen.insert(name).second) throw DataError(path.string() + ": duplicate class name '" + name + "'");
    }
    std::string empty;
    std::size_t empty_count = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = ds.labels.row(r);
        if (std::none_of(row.begin(), row.end(), [](std::uint8_t v) { return v == 1; })) {
            if (empty_count++ < 20) empty += " " + std::to_string(r + 2);
        }
    }
    if (empty_count > 0) {
        throw DataError(path.string() + ": " + std::to_string(empty_count) +
                        " row(s) without any positive label at line(s)" + empty + (empty_count > 20 ? " ..." : ""));
    }
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file " + path.string());
    for (std::size_t i = 0; i < data.feature_dim(); ++i) out << (i ? "," : "") << 'f' << i;
    for (const auto& name : data.class_names) out << ",class:" << name;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto x = data.features.row(r);
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto res = std::to_chars(buf, buf + sizeof buf, x[i]);
            if (i) out << ',';
            out.write(buf, res.ptr - buf);
        }
        for (std::size_t c = 0; c < data.class_count(); ++c) out << ',' << int(data.labels(r, c));
        out << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace mlcil
