#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surfacenet/trainer.hpp"

namespace surfacenet {

/// Dataset locations for the CLI. Relative or missing paths fall back to
/// the SURFACENET_DATA_DIR environment variable as the root.
struct DataConfig {
    std::string synthetic_dir;
    std::string real_dir; // optional
    std::string out_dir = "out";
};

struct RunConfig {
    TrainConfig train;
    DataConfig data;
};

nlohmann::json train_config_to_json(const TrainConfig& config);

/// Strict parser: unknown keys anywhere raise ConfigError naming the key.
TrainConfig train_config_from_json(const nlohmann::json& j);

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

/// Loads a JSON config file and applies dotted-key overrides of the form
/// "train.learning_rate=1e-4" before parsing.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides);

/// Parses overrides against the built-in defaults (no file).
RunConfig default_run_config(const std::vector<std::string>& overrides);

/// Applies one "a.b.c=value" assignment into a JSON document. Values are
/// parsed as JSON when possible and fall back to strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

} // namespace surfacenet
