#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mlcil/data.hpp"
#include "mlcil/losses.hpp"
#include "mlcil/memory.hpp"
#include "mlcil/metrics.hpp"
#include "mlcil/numeric.hpp"

namespace mlcil {

enum class Method {
    fine_tuning,     // L_bce
    kd,              // L_bce + L_kd
    akd_cls_only,    // L_cls
    akd,             // L_cls + L_akd
    akd_replay_bce,  // AKD + plain replay, BCE over the stored (partial) labels
    akd_or_bce,      // AKD + online relabeling, BCE over completed labels
    rebll,           // AKD + online relabeling + L_er
};

struct MethodTraits {
    bool asymmetric_cls = false;
    bool distill = false;
    bool asymmetric_distill = false;
    bool replay = false;
    bool relabel = false;
    bool replay_er = false;
};

MethodTraits traits(Method method);
std::string to_string(Method method);
// Throws ConfigError for unknown names.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

struct DataConfig {
    // "synthetic" or "csv".
    std::string source = "synthetic";
    std::string train_path;
    std::string test_path;
    // Drop training rows with no positive among the current task's classes.
    bool drop_unlabeled = false;
    // The synthetic seed is derived from RunConfig::seed.
    SynthSpec synth;
};

struct RunConfig {
    Scenario scenario{4, 2};
    DataConfig data;
    LossHyperParams loss;
    Method method = Method::rebll;
    std::size_t hidden = 64;
    double relabel_threshold = 0.5;
    std::size_t buffer_per_class = 2;
    // 0 means "same as batch_size".
    std::size_t replay_batch_size = 0;
    std::size_t batch_size = 64;
    std::size_t epochs = 20;
    double lr_base = 1e-3;
    double lr_incremental = 1e-3;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    std::size_t ablation_seeds = 5;

    std::size_t effective_replay_batch() const { return replay_batch_size == 0 ? batch_size : replay_batch_size; }
    // Throws ConfigError naming the offending key.
    void validate() const;
};

struct TrainState {
    TrainState(ClassifierModel model, std::size_t class_count, std::size_t per_class, std::uint64_t seed);

    ClassifierModel model;
    std::optional<ModelSnapshot> old_model;
    MemoryBuffer memory;
    std::size_t completed_tasks = 0;
    std::vector<MetricsRow> log;
    // Mean total loss per epoch of the last trained task.
    std::vector<double> epoch_losses;
    // Independent streams so replay bookkeeping never perturbs batch order.
    std::mt19937_64 shuffle_rng;
    std::mt19937_64 memory_rng;
};

TrainState initial_state(const RunConfig& config, std::size_t input_dim, std::size_t class_count);

// Trains task t (1-based, strictly in order), then updates memory, relabels
// (OR methods) and freezes the old-model snapshot. Throws ProtocolError on
// out-of-order t.
void train_task(TrainState& state, std::size_t t, const TaskSchedule& schedule, const Dataset& train,
                const RunConfig& config);

// Data for a config: synthetic (seeded by config.seed) or the CSV pair.
SplitDatasets load_data(const RunConfig& config);

struct ExperimentResult {
    MetricsReport report;
    TaskSchedule schedule;
    TrainState state;
};

ExperimentResult run_experiment(const RunConfig& config, const SplitDatasets& data);
ExperimentResult run_experiment(const RunConfig& config);

struct LadderEntry {
    std::string name;
    Method method;
    DecayMode decay;
    std::vector<MetricsReport> reports;  // one per seed
    MetricsRow mean_last;
    double mean_avg_map = 0.0;
};

// Every Method plus AKD with a fixed decay exponent, each over
// config.ablation_seeds consecutive seeds starting at config.seed.
std::vector<LadderEntry> ablation_ladder(const RunConfig& base_config);
void write_ladder_csv(const std::filesystem::path& path, const std::vector<LadderEntry>& ladder);

}  // namespace mlcil
