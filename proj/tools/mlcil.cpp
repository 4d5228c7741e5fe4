// Command-line front end: run / ablate / gen-data / check-grads.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlcil/config.hpp"
#include "mlcil/errors.hpp"
#include "mlcil/gradcheck.hpp"
#include "mlcil/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::optional<std::string> config;
    std::vector<std::string> sets;
    std::optional<std::string> scenario;
    std::optional<std::string> method;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool no_timestamp = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Sectioned key/value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.sets, "Override, key=value (repeatable)");
    cmd->add_option("--scenario", o.scenario, "Class schedule, e.g. B4-C2");
    cmd->add_option("--method", o.method, "fine_tuning|kd|akd_cls_only|akd|akd_replay_bce|akd_or_bce|rebll");
    cmd->add_option("--seed", o.seed, "Run seed");
    cmd->add_option("--out", o.out, "Output directory (default: $MLCIL_OUT_DIR or ./out)");
    cmd->add_flag("--no-timestamp", o.no_timestamp, "Omit the timestamp from report.json");
}

mlcil::RunConfig resolve(const CommonOptions& o) {
    std::vector<std::string> overrides = o.sets;
    if (o.scenario) {
        const auto s = mlcil::parse_scenario(*o.scenario);
        overrides.push_back("scenario.base=" + std::to_string(s.base));
        overrides.push_back("scenario.increment=" + std::to_string(s.increment));
    }
    if (o.method) overrides.push_back("train.method=" + *o.method);
    if (o.seed) overrides.push_back("train.seed=" + std::to_string(*o.seed));
    std::optional<fs::path> path;
    if (o.config) path = *o.config;
    return mlcil::parse_config(path, overrides);
}

fs::path output_dir(const CommonOptions& o) {
    fs::path dir;
    if (o.out) {
        dir = *o.out;
    } else if (const char* env = std::getenv("MLCIL_OUT_DIR"); env && *env) {
        dir = env;
    } else {
        dir = "out";
    }
    fs::create_directories(dir);
    return dir;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

int cmd_run(const CommonOptions& o, bool dump_buffer) {
    const mlcil::RunConfig config = resolve(o);
    const auto data = mlcil::load_data(config);
    const auto result = mlcil::run_experiment(config, data);
    const fs::path dir = output_dir(o);
    mlcil::write_metrics_csv(dir / "metrics.csv", result.report);
    std::optional<std::string> stamp;
    if (!o.no_timestamp) stamp = utc_timestamp();
    write_json(dir / "report.json", mlcil::report_to_json(config, result.report, stamp));
    if (dump_buffer) result.state.memory.dump_csv(dir / "buffer_dump.csv", data.train.class_names);

    std::printf("%-5s %6s %8s %8s %8s %8s\n", "task", "|C|", "mAP", "CF1", "OF1", "FPR");
    for (const auto& r : result.report.rows) {
        std::printf("%-5zu %6zu %8.2f %8.2f %8.2f %8.2f\n", r.task, r.label_space, 100 * r.map, 100 * r.cf1,
                    100 * r.of1, 100 * r.fpr);
    }
    std::printf("method=%s last mAP=%.2f avg mAP=%.2f -> %s\n", mlcil::to_string(config.method).c_str(),
                100 * result.report.last.map, 100 * result.report.avg_map, dir.string().c_str());
    return 0;
}

int cmd_ablate(const CommonOptions& o) {
    const mlcil::RunConfig config = resolve(o);
    const auto ladder = mlcil::ablation_ladder(config);
    const fs::path dir = output_dir(o);
    mlcil::write_ladder_csv(dir / "ladder.csv", ladder);

    std::printf("%-18s %-9s %8s %8s %8s %8s %8s\n", "variant", "decay", "mAP", "CF1", "OF1", "FPR", "avg");
    for (const auto& e : ladder) {
        std::printf("%-18s %-9s %8.2f %8.2f %8.2f %8.2f %8.2f\n", e.name.c_str(),
                    e.decay == mlcil::DecayMode::adaptive ? "adaptive" : "fixed", 100 * e.mean_last.map,
                    100 * e.mean_last.cf1, 100 * e.mean_last.of1, 100 * e.mean_last.fpr, 100 * e.mean_avg_map);
    }
    std::printf("seeds %llu..%llu -> %s\n", static_cast<unsigned long long>(config.seed),
                static_cast<unsigned long long>(config.seed + config.ablation_seeds - 1),
                (dir / "ladder.csv").string().c_str());
    return 0;
}

int cmd_gen_data(const CommonOptions& o) {
    const mlcil::RunConfig config = resolve(o);
    if (config.data.source != "synthetic") throw mlcil::ConfigError("gen-data requires data.source = synthetic");
    const auto data = mlcil::load_data(config);
    const fs::path dir = output_dir(o);
    mlcil::write_dataset(dir / "train.csv", data.train);
    mlcil::write_dataset(dir / "test.csv", data.test);
    std::printf("wrote %zu train / %zu test samples (%zu features, %zu classes) to %s\n", data.train.size(),
                data.test.size(), data.train.feature_dim(), data.train.class_count(), dir.string().c_str());
    return 0;
}

int cmd_check_grads(std::size_t draws, std::uint64_t seed, double tolerance) {
    const auto results = mlcil::check_loss_gradients(draws, seed, tolerance);
    bool ok = true;
    std::printf("%-8s %6s %14s  %s\n", "loss", "draws", "max rel err", "worst parameter");
    for (const auto& r : results) {
        std::printf("%-8s %6zu %14.3e  %s (analytic %.6e, numeric %.6e)%s\n", mlcil::to_string(r.kind).c_str(), r.draws,
                    r.worst.max_relative_error, r.worst.worst_parameter.c_str(), r.worst.analytic, r.worst.numeric,
                    r.passed ? "" : "  FAIL");
        ok = ok && r.passed;
    }
    std::printf("tolerance %.1e: %s\n", tolerance, ok ? "pass" : "FAIL");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-label class-incremental learning experiments"};
    app.require_subcommand(1);

    CommonOptions run_opts, ablate_opts, gen_opts;
    bool dump_buffer = false;
    auto* run = app.add_subcommand("run", "Train one method over a {Bx-Cy} schedule");
    add_common(run, run_opts);
    run->add_flag("--dump-buffer", dump_buffer, "Also write buffer_dump.csv");

    auto* ablate = app.add_subcommand("ablate", "Run every method variant over several seeds");
    add_common(ablate, ablate_opts);

    auto* gen = app.add_subcommand("gen-data", "Write synthetic train.csv / test.csv");
    add_common(gen, gen_opts);

    std::size_t draws = 100;
    std::uint64_t grad_seed = 0;
    double tolerance = 1e-5;
    auto* grads = app.add_subcommand("check-grads", "Finite-difference check of every loss gradient");
    grads->add_option("--draws", draws, "Random model/batch draws per loss");
    grads->add_option("--seed", grad_seed, "Seed of the first draw");
    grads->add_option("--tolerance", tolerance, "Maximum relative error");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_opts, dump_buffer);
        if (*ablate) return cmd_ablate(ablate_opts);
        if (*gen) return cmd_gen_data(gen_opts);
        if (*grads) return cmd_check_grads(draws, grad_seed, tolerance);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
