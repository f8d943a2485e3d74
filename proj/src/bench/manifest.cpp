#include "fedfisher/bench/manifest.hpp"

#include "fedfisher/fisher.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifndef FEDFISHER_VERSION
#define FEDFISHER_VERSION "0.1.0"
#endif

namespace fedfisher::bench {

std::string version_string() { return FEDFISHER_VERSION; }

std::vector<std::string> reference_keys(const ExperimentConfig& cfg) {
  if (cfg.experiment != Experiment::FisherAccuracy) return {};
  return {reference_key(cfg.model_spec(0), cfg.reference_samples, cfg.seed)};
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json make_manifest(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["config"] = to_json(cfg);
  j["version"] = version_string();
  j["seed"] = cfg.seed;
  j["referenceFisherKeys"] = reference_keys(cfg);
  j["timestamp"] = utc_timestamp();
  return j;
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir)) {
    throw ConfigError("cannot create output directory '" + cfg.out_dir + "'" +
                      (ec ? ": " + ec.message() : std::string()));
  }
  const fs::path probe = fs::path(cfg.out_dir) / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("output directory '" + cfg.out_dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

void write_manifest(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  const std::filesystem::path path = std::filesystem::path(cfg.out_dir) / "manifest.json";
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << make_manifest(cfg).dump(2) << '\n';
}

int cmd_manifest(const ExperimentConfig& cfg) {
  write_manifest(cfg);
  return 0;
}

}  // namespace fedfisher::bench
