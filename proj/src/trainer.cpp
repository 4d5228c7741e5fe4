#include "mlcil/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>

#include "mlcil/errors.hpp"
#include "mlcil/kernels.hpp"

namespace mlcil {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent per-purpose seeds derived from the run seed.
enum class Stream : std::uint64_t { model = 1, shuffle = 2, memory = 3, data = 4 };

std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
    return splitmix64(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(s));
}

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto x = source.row(rows[i]);
        std::copy(x.begin(), x.end(), out.row(i).begin());
    }
    return out;
}

void add_scaled(std::span<double> dst, std::span<const double> src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

ClassSet intersect(const ClassSet& a, const ClassSet& b) {
    ClassSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

MethodTraits traits(Method method) {
    MethodTraits t;
    switch (method) {
    case Method::fine_tuning:
        break;
    case Method::kd:
        t.distill = true;
        break;
    case Method::akd_cls_only:
        t.asymmetric_cls = true;
        break;
    case Method::akd:
        t.asymmetric_cls = t.distill = t.asymmetric_distill = true;
        break;
    case Method::akd_replay_bce:
        t.asymmetric_cls = t.distill = t.asymmetric_distill = t.replay = true;
        break;
    case Method::akd_or_bce:
        t.asymmetric_cls = t.distill = t.asymmetric_distill = t.replay = t.relabel = true;
        break;
    case Method::rebll:
        t.asymmetric_cls = t.distill = t.asymmetric_distill = t.replay = t.relabel = t.replay_er = true;
        break;
    }
    return t;
}

std::string to_string(Method method) {
    switch (method) {
    case Method::fine_tuning: return "fine_tuning";
    case Method::kd: return "kd";
    case Method::akd_cls_only: return "akd_cls_only";
    case Method::akd: return "akd";
    case Method::akd_replay_bce: return "akd_replay_bce";
    case Method::akd_or_bce: return "akd_or_bce";
    case Method::rebll: return "rebll";
    }
    return "?";
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::fine_tuning,    Method::kd,         Method::akd_cls_only,
                                             Method::akd,            Method::akd_replay_bce, Method::akd_or_bce,
                                             Method::rebll};
    return methods;
}

Method parse_method(const std::string& name) {
    for (Method m : all_methods()) {
        if (to_string(m) == name) return m;
    }
    std::string known;
    for (Method m : all_methods()) known += (known.empty() ? "" : ", ") + to_string(m);
    throw ConfigError("train.method: unknown method '" + name + "' (known: " + known + ")");
}

void RunConfig::validate() const {
    loss.validate();
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
    if (scenario.increment < 1) throw ConfigError("scenario.increment must be >= 1");
    if (!(relabel_threshold > 0.0 && relabel_threshold < 1.0)) {
        throw ConfigError("memory.threshold must lie in (0, 1)");
    }
    if (!(lr_base > 0.0) || !(lr_incremental > 0.0)) throw ConfigError("train.lr_base/lr_incremental must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
    if (ablation_seeds < 1) throw ConfigError("ablation.seeds must be >= 1");
    if (data.source != "synthetic" && data.source != "csv") {
        throw ConfigError("data.source must be 'synthetic' or 'csv', got '" + data.source + "'");
    }
    if (data.source == "csv" && (data.train_path.empty() || data.test_path.empty())) {
        throw ConfigError("data.train_path and data.test_path are required when data.source = csv");
    }
    if (data.source == "synthetic") {
        try {
            data.synth.validate();
        } catch (const DataError& e) {
            throw ConfigError(std::string("data: ") + e.what());
        }
    }
}

TrainState::TrainState(ClassifierModel model_in, std::size_t class_count, std::size_t per_class, std::uint64_t seed)
    : model(std::move(model_in)),
      memory(class_count, per_class),
      shuffle_rng(stream_seed(seed, Stream::shuffle)),
      memory_rng(stream_seed(seed, Stream::memory)) {}

TrainState initial_state(const RunConfig& config, std::size_t input_dim, std::size_t class_count) {
    return TrainState(ClassifierModel::random(input_dim, config.hidden, class_count,
                                              stream_seed(config.seed, Stream::model)),
                      class_count, config.buffer_per_class, config.seed);
}

void train_task(TrainState& state, std::size_t t, const TaskSchedule& schedule, const Dataset& train,
                const RunConfig& config) {
    if (t != state.completed_tasks + 1) {
        throw ProtocolError("train_task: expected task " + std::to_string(state.completed_tasks + 1) + ", got " +
                            std::to_string(t));
    }
    if (t > schedule.task_count()) throw ProtocolError("train_task: task " + std::to_string(t) + " beyond schedule");

    const MethodTraits method = traits(config.method);
    const ClassSet& current = schedule.task_classes(t);
    const ClassSet old_classes = schedule.classes_before(t);
    const std::size_t seen_count = current.size() + old_classes.size();
    const double gamma_pos = training_exponent(config.loss, config.loss.alpha, seen_count);
    const double gamma_neg = training_exponent(config.loss, config.loss.beta, seen_count);
    const bool distill = method.distill && state.old_model.has_value() && !old_classes.empty();
    const std::size_t outputs = state.model.output_dim();

    std::vector<std::size_t> rows = config.data.drop_unlabeled ? rows_with_positive(train, current)
                                                               : std::vector<std::size_t>(train.size());
    if (!config.data.drop_unlabeled) std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<TriStateLabelVector> masked(train.size());
    for (std::size_t r : rows) masked[r] = mask_labels(train.labels.row(r), current);

    AdamConfig adam;
    adam.learning_rate = t == 1 ? config.lr_base : config.lr_incremental;
    adam.weight_decay = config.weight_decay;
    OptimizerState optimizer(state.model.parameter_count(), adam);

    state.epoch_losses.clear();
    const std::size_t replay_batch = config.effective_replay_batch();
    std::vector<double> grad_row(outputs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(rows.begin(), rows.end(), state.shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < rows.size(); start += config.batch_size) {
            const std::size_t end = std::min(rows.size(), start + config.batch_size);
            const std::span<const std::size_t> batch_rows(rows.data() + start, end - start);
            const double inv_batch = 1.0 / static_cast<double>(batch_rows.size());

            std::optional<std::vector<const MemorySample*>> replay;
            if (method.replay && t > 1) replay = state.memory.sample_replay(replay_batch, state.memory_rng);
            const LossWeights w =
                composite_weights(distill, replay.has_value(), config.loss.lambda_akd, config.loss.lambda_er);

            const Matrix inputs = gather_rows(train.features, batch_rows);
            const Matrix probs = kernels::forward_batch(state.model, inputs);
            Matrix old_probs;
            if (distill) old_probs = kernels::forward_batch(state.old_model->model(), inputs);

            Matrix out_grads(batch_rows.size(), outputs);
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < batch_rows.size(); ++i) {
                const auto& y = masked[batch_rows[i]];
                const auto p = probs.row(i);
                const LossValue cls = method.asymmetric_cls ? cls_loss_with_exponent(p, y, current, gamma_pos)
                                                            : bce_loss(p, y, current);
                std::fill(grad_row.begin(), grad_row.end(), 0.0);
                add_scaled(grad_row, cls.gradient, w.classification);
                double sample_loss = w.classification * cls.value;
                if (distill) {
                    const auto q = old_probs.row(i);
                    const LossValue kd = method.asymmetric_distill
                                             ? akd_loss_with_exponent(p, q, old_classes, gamma_pos)
                                             : kd_loss(p, q, old_classes);
                    add_scaled(grad_row, kd.gradient, w.distillation);
                    sample_loss += w.distillation * kd.value;
                }
                batch_loss += sample_loss * inv_batch;
                auto g = out_grads.row(i);
                for (std::size_t c = 0; c < outputs; ++c) g[c] = grad_row[c] * inv_batch;
            }
            std::vector<double> grads = kernels::backward_batch(state.model, inputs, out_grads);

            if (replay) {
                const auto& samples = *replay;
                const double inv_replay = 1.0 / static_cast<double>(samples.size());
                Matrix replay_inputs(samples.size(), state.model.input_dim());
                for (std::size_t i = 0; i < samples.size(); ++i) {
                    std::copy(samples[i]->features.begin(), samples[i]->features.end(),
                              replay_inputs.row(i).begin());
                }
                const Matrix replay_probs = kernels::forward_batch(state.model, replay_inputs);
                Matrix replay_grads(samples.size(), outputs);
                for (std::size_t i = 0; i < samples.size(); ++i) {
                    const auto p = replay_probs.row(i);
                    const auto& y = samples[i]->labels;
                    LossValue er;
                    if (method.replay_er) {
                        er = er_loss_with_exponent(p, y, old_classes, gamma_neg);
                    } else if (method.relabel) {
                        er = bce_loss(p, y, old_classes);
                    } else {
                        // Plain replay only has the labels of the sample's own task.
                        er = bce_loss(p, y, intersect(y.annotated_classes(), old_classes));
                    }
                    batch_loss += w.replay * er.value * inv_replay;
                    auto g = replay_grads.row(i);
                    for (std::size_t c = 0; c < outputs; ++c) g[c] = w.replay * er.gradient[c] * inv_replay;
                }
                const auto rg = kernels::backward_batch(state.model, replay_inputs, replay_grads);
                add_scaled(grads, rg, 1.0);
            }

            optimizer_step(state.model, grads, optimizer);
            epoch_loss += batch_loss;
            ++batches;
        }
        state.epoch_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    }

    if (method.replay) {
        // One pass over the task stream in dataset order.
        std::sort(rows.begin(), rows.end());
        for (std::size_t r : rows) {
            const auto x = train.features.row(r);
            MemorySample sample;
            sample.features.assign(x.begin(), x.end());
            sample.labels = masked[r];
            sample.source_task = t;
            sample.source_row = r;
            state.memory.reservoir_update(std::move(sample), current, state.memory_rng);
        }
        if (method.relabel) {
            state.memory.relabel(state.old_model ? &*state.old_model : nullptr, state.model, schedule, t,
                                 config.relabel_threshold);
        }
    }
    state.old_model.emplace(snapshot(state.model, static_cast<int>(t)));
    state.completed_tasks = t;
}

SplitDatasets load_data(const RunConfig& config) {
    if (config.data.source == "csv") {
        SplitDatasets out;
        out.train = load_dataset(config.data.train_path, Split::train);
        out.test = load_dataset(config.data.test_path, Split::test);
        if (out.train.class_names != out.test.class_names || out.train.feature_dim() != out.test.feature_dim()) {
            throw DataError("train and test files disagree on feature columns or class names");
        }
        return out;
    }
    SynthSpec spec = config.data.synth;
    spec.seed = stream_seed(config.seed, Stream::data);
    return synth_dataset(spec);
}

ExperimentResult run_experiment(const RunConfig& config, const SplitDatasets& data) {
    config.validate();
    data.train.validate();
    data.test.validate();
    TaskSchedule schedule = build_schedule(config.scenario.base, config.scenario.increment, data.train.class_names);
    TrainState state = initial_state(config, data.train.feature_dim(), data.train.class_count());
    for (std::size_t t = 1; t <= schedule.task_count(); ++t) {
        train_task(state, t, schedule, data.train, config);
        const ClassSet seen = schedule.classes_up_to(t);
        const auto rows = rows_with_positive(data.test, seen);
        MetricsRow row = evaluate(state.model, data.test, rows, seen, kDecisionThreshold);
        row.task = t;
        state.log.push_back(row);
    }
    MetricsReport report = aggregate(state.log);
    return ExperimentResult{std::move(report), std::move(schedule), std::move(state)};
}

ExperimentResult run_experiment(const RunConfig& config) {
    config.validate();
    return run_experiment(config, load_data(config));
}

std::vector<LadderEntry> ablation_ladder(const RunConfig& base_config) {
    base_config.validate();
    std::vector<LadderEntry> ladder;
    for (Method m : all_methods()) {
        ladder.push_back(LadderEntry{to_string(m), m, base_config.loss.decay, {}, {}, 0.0});
        if (m == Method::akd) {
            ladder.push_back(LadderEntry{"akd_fixed_decay", m, DecayMode::fixed, {}, {}, 0.0});
        }
    }
    const std::size_t seeds = base_config.ablation_seeds;
    for (auto& entry : ladder) entry.reports.resize(seeds);

    // Datasets depend only on the seed, so build them once per seed.
    std::vector<SplitDatasets> data(seeds);
    for (std::size_t s = 0; s < seeds; ++s) {
        RunConfig c = base_config;
        c.seed = base_config.seed + s;
        data[s] = load_data(c);
    }

    const auto jobs = static_cast<std::ptrdiff_t>(ladder.size() * seeds);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < jobs; ++j) {
        const std::size_t e = static_cast<std::size_t>(j) / seeds;
        const std::size_t s = static_cast<std::size_t>(j) % seeds;
        try {
            RunConfig c = base_config;
            c.method = ladder[e].method;
            c.loss.decay = ladder[e].decay;
            c.seed = base_config.seed + s;
            ladder[e].reports[s] = run_experiment(c, data[s]).report;
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (auto& entry : ladder) {
        MetricsRow mean;
        double avg = 0.0;
        for (const auto& r : entry.reports) {
            mean.map += r.last.map;
            mean.cf1 += r.last.cf1;
            mean.of1 += r.last.of1;
            mean.fpr += r.last.fpr;
            avg += r.avg_map;
        }
        const double n = static_cast<double>(entry.reports.size());
        mean.task = entry.reports.front().last.task;
        mean.label_space = entry.reports.front().last.label_space;
        mean.map /= n;
        mean.cf1 /= n;
        mean.of1 /= n;
        mean.fpr /= n;
        entry.mean_last = mean;
        entry.mean_avg_map = avg / n;
    }
    return ladder;
}

void write_ladder_csv(const std::filesystem::path& path, const std::vector<LadderEntry>& ladder) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "variant,decay,seeds,mAP,CF1,OF1,FPR,avg_mAP\n";
    char buf[256];
    for (const auto& e : ladder) {
        std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.4f,%.4f,%.4f,%.4f,%.4f\n", e.name.c_str(),
                      e.decay == DecayMode::adaptive ? "adaptive" : "fixed", e.reports.size(),
                      100.0 * e.mean_last.map, 100.0 * e.mean_last.cf1, 100.0 * e.mean_last.of1,
                      100.0 * e.mean_last.fpr, 100.0 * e.mean_avg_map);
        out << buf;
    }
}

}  // namespace mlcil
