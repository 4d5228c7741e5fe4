#include "mlcil/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mlcil/errors.hpp"

namespace mlcil {

namespace {

using json = nlohmann::json;

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(to_u64(key, value));
}

bool to_bool(const std::string& key, const std::string& value) {
    std::string v = value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

struct KeySpec {
    std::string section;
    std::string name;
    std::function<void(RunConfig&, const std::string& path, const std::string& value)> set;
    std::function<json(const RunConfig&)> get;

    std::string path() const { return section + "." + name; }
};

#define MLCIL_DOUBLE(sec, key, field) \
    KeySpec{sec, key, [](RunConfig& c, const std::string& p, const std::string& v) { c.field = to_double(p, v); }, \
            [](const RunConfig& c) { return json(c.field); }}
#define MLCIL_SIZE(sec, key, field) \
    KeySpec{sec, key, [](RunConfig& c, const std::string& p, const std::string& v) { c.field = to_size(p, v); }, \
            [](const RunConfig& c) { return json(c.field); }}
#define MLCIL_BOOL(sec, key, field) \
    KeySpec{sec, key, [](RunConfig& c, const std::string& p, const std::string& v) { c.field = to_bool(p, v); }, \
            [](const RunConfig& c) { return json(c.field); }}
#define MLCIL_STRING(sec, key, field) \
    KeySpec{sec, key, [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; }, \
            [](const RunConfig& c) { return json(c.field); }}

const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys{
        MLCIL_SIZE("scenario", "base", scenario.base),
        MLCIL_SIZE("scenario", "increment", scenario.increment),

        MLCIL_STRING("data", "source", data.source),
        MLCIL_STRING("data", "train_path", data.train_path),
        MLCIL_STRING("data", "test_path", data.test_path),
        MLCIL_BOOL("data", "drop_unlabeled", data.drop_unlabeled),
        MLCIL_SIZE("data", "classes", data.synth.classes),
        MLCIL_SIZE("data", "feature_dim", data.synth.feature_dim),
        MLCIL_SIZE("data", "prototypes_per_class", data.synth.prototypes_per_class),
        MLCIL_DOUBLE("data", "cooccurrence", data.synth.cooccurrence),
        MLCIL_DOUBLE("data", "prototype_overlap", data.synth.prototype_overlap),
        MLCIL_DOUBLE("data", "noise", data.synth.noise),
        MLCIL_DOUBLE("data", "label_rate", data.synth.label_rate),
        MLCIL_SIZE("data", "max_positives", data.synth.max_positives),
        MLCIL_SIZE("data", "train_samples", data.synth.train_samples),
        MLCIL_SIZE("data", "test_samples", data.synth.test_samples),

        MLCIL_SIZE("model", "hidden", hidden),

        MLCIL_DOUBLE("loss", "alpha", loss.alpha),
        MLCIL_DOUBLE("loss", "beta", loss.beta),
        MLCIL_DOUBLE("loss", "lambda_akd", loss.lambda_akd),
        MLCIL_DOUBLE("loss", "lambda_er", loss.lambda_er),
        KeySpec{"loss", "log_base",
                [](RunConfig& c, const std::string& p, const std::string& v) {
                    if (v == "natural" || v == "e") c.loss.log_base = LogBase::natural;
                    else if (v == "10" || v == "base10") c.loss.log_base = LogBase::base10;
                    else throw ConfigError(p + ": expected 'natural' or '10', got '" + v + "'");
                },
                [](const RunConfig& c) { return json(c.loss.log_base == LogBase::natural ? "natural" : "10"); }},
        KeySpec{"loss", "decay",
                [](RunConfig& c, const std::string& p, const std::string& v) {
                    if (v == "adaptive") c.loss.decay = DecayMode::adaptive;
                    else if (v == "fixed") c.loss.decay = DecayMode::fixed;
                    else throw ConfigError(p + ": expected 'adaptive' or 'fixed', got '" + v + "'");
                },
                [](const RunConfig& c) { return json(c.loss.decay == DecayMode::adaptive ? "adaptive" : "fixed"); }},

        MLCIL_SIZE("memory", "per_class", buffer_per_class),
        MLCIL_DOUBLE("memory", "threshold", relabel_threshold),
        MLCIL_SIZE("memory", "replay_batch_size", replay_batch_size),

        KeySpec{"train", "method",
                [](RunConfig& c, const std::string&, const std::string& v) { c.method = parse_method(v); },
                [](const RunConfig& c) { return json(to_string(c.method)); }},
        MLCIL_SIZE("train", "batch_size", batch_size),
        MLCIL_SIZE("train", "epochs", epochs),
        MLCIL_DOUBLE("train", "lr_base", lr_base),
        MLCIL_DOUBLE("train", "lr_incremental", lr_incremental),
        MLCIL_DOUBLE("train", "weight_decay", weight_decay),
        KeySpec{"train", "seed",
                [](RunConfig& c, const std::string& p, const std::string& v) { c.seed = to_u64(p, v); },
                [](const RunConfig& c) { return json(c.seed); }},

        MLCIL_SIZE("ablation", "seeds", ablation_seeds),
    };
    return keys;
}

#undef MLCIL_DOUBLE
#undef MLCIL_SIZE
#undef MLCIL_BOOL
#undef MLCIL_STRING

const KeySpec& lookup(const std::string& key) {
    const auto& keys = registry();
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
        for (const auto& k : keys) {
            if (k.path() == key) return k;
        }
    } else {
        for (const auto& k : keys) {
            if (k.name == key) return k;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

void set_key(RunConfig& config, const std::string& key, const std::string& value) {
    const KeySpec& spec = lookup(key);
    spec.set(config, spec.path(), trim(value));
}

}  // namespace

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    set_key(config, key, assignment.substr(eq + 1));
}

RunConfig parse_config_text(const std::string& text, std::span<const std::string> overrides) {
    // Boost's INI reader only knows ';' comments.
    std::ostringstream cleaned;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t.front() == '#') continue;
        cleaned << line << '\n';
    }
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(cleaned.str());
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.message() + " at line " +
                          std::to_string(e.line()));
    }

    RunConfig config;
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            set_key(config, name, node.data());
            continue;
        }
        for (const auto& [key, leaf] : node) {
            if (!leaf.empty()) throw ConfigError("nested section under '" + name + "." + key + "'");
            set_key(config, name + "." + key, leaf.data());
        }
    }
    for (const auto& o : overrides) apply_override(config, o);
    config.validate();
    return config;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides) {
    std::string text;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot open config file " + path->string());
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    return parse_config_text(text, overrides);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : registry()) out.push_back(k.path());
    return out;
}

json config_to_json(const RunConfig& config) {
    json out = json::object();
    for (const auto& k : registry()) out[k.section][k.name] = k.get(config);
    return out;
}

json metrics_row_to_json(const MetricsRow& row) {
    return json{{"task", row.task}, {"label_space", row.label_space}, {"mAP", row.map},
                {"CF1", row.cf1},   {"OF1", row.of1},                 {"FPR", row.fpr}};
}

json report_to_json(const RunConfig& config, const MetricsReport& report, const std::optional<std::string>& timestamp) {
    json out;
    out["config"] = config_to_json(config);
    out["seed"] = config.seed;
    out["method"] = to_string(config.method);
    out["scenario"] = "B" + std::to_string(config.scenario.base) + "-C" + std::to_string(config.scenario.increment);
    out["rows"] = json::array();
    for (const auto& r : report.rows) out["rows"].push_back(metrics_row_to_json(r));
    out["last"] = {{"mAP", report.last.map}, {"CF1", report.last.cf1}, {"OF1", report.last.of1},
                   {"FPR", report.last.fpr}};
    out["avg"] = {{"mAP", report.avg_map}};
    if (timestamp) out["timestamp"] = *timestamp;
    return out;
}

}  // namespace mlcil
