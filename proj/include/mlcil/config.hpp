#pragma once

// Run configuration files are sectioned key/value text:
//
//   # comment          (';' also starts a comment)
//   [loss]
//   alpha = 1.2
//   decay = adaptive
//
// Keys may be given as `section.key` or, in overrides and outside any
// section, as the bare key name (every key name is unique). Overrides are
// applied after the file and win over it.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlcil/metrics.hpp"
#include "mlcil/trainer.hpp"

namespace mlcil {

// Throws ConfigError carrying the key path for unknown keys, type mismatches
// and invariant violations.
RunConfig parse_config_text(const std::string& text, std::span<const std::string> overrides = {});
RunConfig parse_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides = {});

// Applies one `key=value` override in place (no validation).
void apply_override(RunConfig& config, const std::string& assignment);

// Every accepted key in `section.key` form.
std::vector<std::string> config_keys();

// The fully resolved configuration, one object per section.
nlohmann::json config_to_json(const RunConfig& config);

nlohmann::json metrics_row_to_json(const MetricsRow& row);

// Config echo, per-task rows, Last/Avg blocks and seed. The timestamp is
// omitted when not given.
nlohmann::json report_to_json(const RunConfig& config, const MetricsReport& report,
                              const std::optional<std::string>& timestamp);

}  // namespace mlcil
