#pragma once

#include "fedfisher/bench/config.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace fedfisher::bench {

/// Version string baked in at configure time (git describe when available).
std::string version_string();

/// Reference-Fisher cache keys the config needs (empty for experiments without one).
std::vector<std::string> reference_keys(const ExperimentConfig& cfg);

nlohmann::json make_manifest(const ExperimentConfig& cfg);

/// Writes manifest.json into cfg.out_dir, creating the directory if needed.
/// Throws ConfigError when the directory cannot be created or written.
void write_manifest(const ExperimentConfig& cfg);

/// Creates cfg.out_dir if needed; throws ConfigError when it is not writable.
void ensure_out_dir(const ExperimentConfig& cfg);

int cmd_manifest(const ExperimentConfig& cfg);

}  // namespace fedfisher::bench
