#pragma once

#include "fedfisher/model.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedfisher::bench {

enum class Experiment { FisherAccuracy, Iterative, OneStepCoverage };

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);

/// Invalid or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::FisherAccuracy;
  Family family = Family::Logistic;
  CovariateLaw covariates = CovariateLaw::StdNormal;
  std::size_t d = 4;
  std::string theta0_rule = "inv_sqrt_d";  // theta0 = d^{-1/2} 1; the only rule
  std::vector<std::size_t> n_grid;
  std::vector<std::size_t> m_grid;
  std::vector<double> sigma2_grid;  // FisherAccuracy only
  std::size_t reps = 500;
  std::uint64_t seed = 20240601;
  std::size_t t_max = 3;  // Iterative only
  double level = 0.95;
  std::string out_dir = "out";
  /// Monte-Carlo draws for the reference Fisher information (FisherAccuracy).
  std::size_t reference_samples = 2'000'000;
  /// Fit the pooled oracle estimator in OneStepCoverage (needed for distances).
  bool with_oracle = true;
  /// Worker threads for replications; 0 selects the hardware concurrency.
  std::size_t threads = 0;

  bool operator==(const ExperimentConfig&) const = default;

  /// Desk-scale defaults for each experiment.
  static ExperimentConfig defaults(Experiment experiment);

  ModelSpec model_spec(std::uint64_t seed) const;

  /// Trims the n and m grids to {100, 400}.
  void apply_fast_preset();

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys take the experiment's defaults. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace fedfisher::bench
