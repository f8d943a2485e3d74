#include "fedfisher/bench/config.hpp"

#include <algorithm>
#include <fstream>

namespace fedfisher::bench {

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::FisherAccuracy: return "fisher-acc";
    case Experiment::Iterative: return "iterate";
    case Experiment::OneStepCoverage: return "onestep";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  if (name == "fisher-acc" || name == "FisherAccuracy") return Experiment::FisherAccuracy;
  if (name == "iterate" || name == "Iterative") return Experiment::Iterative;
  if (name == "onestep" || name == "OneStepCoverage") return Experiment::OneStepCoverage;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::defaults(Experiment experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.n_grid = {100, 200, 400, 800};
  cfg.m_grid = {100, 200, 400, 800};
  switch (experiment) {
    case Experiment::FisherAccuracy:
      cfg.family = Family::Logistic;
      cfg.d = 4;
      cfg.sigma2_grid = {1.0 / 16.0, 1.0 / 256.0, 1.0 / 65536.0};
      break;
    case Experiment::Iterative:
      cfg.family = Family::Poisson;
      cfg.d = 4;
      break;
    case Experiment::OneStepCoverage:
      cfg.family = Family::Logistic;
      cfg.d = 2;
      cfg.n_grid = {100, 200, 400, 800, 1600};
      cfg.m_grid = {100, 200, 400, 800, 1600};
      break;
  }
  return cfg;
}

ModelSpec ExperimentConfig::model_spec(std::uint64_t model_seed) const {
  return ModelSpec::standard(family, d, covariates, model_seed);
}

void ExperimentConfig::apply_fast_preset() {
  n_grid = {100, 400};
  m_grid = {100, 400};
}

void ExperimentConfig::validate() const {
  if (d < 1) throw ConfigError("d must be >= 1");
  if (theta0_rule != "inv_sqrt_d") throw ConfigError("theta0Rule must be 'inv_sqrt_d'");
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (n_grid.empty() || m_grid.empty()) throw ConfigError("nGrid and mGrid must be non-empty");
  for (std::size_t n : n_grid) {
    if (n <= d) throw ConfigError("every n must exceed d");
  }
  for (std::size_t m : m_grid) {
    if (m < 1) throw ConfigError("every m must be >= 1");
  }
  if (experiment == Experiment::FisherAccuracy) {
    if (sigma2_grid.empty()) throw ConfigError("sigma2Grid must be non-empty for fisher-acc");
    for (double s : sigma2_grid) {
      if (!(s >= 0.0)) throw ConfigError("sigma2 values must be >= 0");
    }
    if (reference_samples < 1'000'000) {
      throw ConfigError("referenceSamples must be >= 1e6");
    }
  }
  if (experiment == Experiment::Iterative && t_max < 1) throw ConfigError("Tmax must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (out_dir.empty()) throw ConfigError("outDir must be non-empty");
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = to_string(cfg.experiment);
  j["family"] = to_string(cfg.family);
  j["covariates"] = to_string(cfg.covariates);
  j["d"] = cfg.d;
  j["theta0Rule"] = cfg.theta0_rule;
  j["nGrid"] = cfg.n_grid;
  j["mGrid"] = cfg.m_grid;
  j["sigma2Grid"] = cfg.sigma2_grid;
  j["reps"] = cfg.reps;
  j["seed"] = cfg.seed;
  j["Tmax"] = cfg.t_max;
  j["level"] = cfg.level;
  j["outDir"] = cfg.out_dir;
  j["referenceSamples"] = cfg.reference_samples;
  j["withOracle"] = cfg.with_oracle;
  j["threads"] = cfg.threads;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static constexpr std::string_view kKeys[] = {
      "experiment", "family", "covariates", "d", "theta0Rule", "nGrid", "mGrid", "sigma2Grid",
      "reps", "seed", "Tmax", "level", "outDir", "referenceSamples", "withOracle", "threads"};
  for (const auto& item : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), item.key()) == std::end(kKeys)) {
      throw ConfigError("unknown config key '" + item.key() + "'");
    }
  }
  try {
    const Experiment e = parse_experiment(j.at("experiment").get<std::string>());
    ExperimentConfig cfg = ExperimentConfig::defaults(e);
    if (j.contains("family")) cfg.family = parse_family(j["family"].get<std::string>());
    if (j.contains("covariates")) {
      cfg.covariates = parse_covariate_law(j["covariates"].get<std::string>());
    }
    if (j.contains("d")) cfg.d = j["d"].get<std::size_t>();
    if (j.contains("theta0Rule")) cfg.theta0_rule = j["theta0Rule"].get<std::string>();
    if (j.contains("nGrid")) cfg.n_grid = j["nGrid"].get<std::vector<std::size_t>>();
    if (j.contains("mGrid")) cfg.m_grid = j["mGrid"].get<std::vector<std::size_t>>();
    if (j.contains("sigma2Grid")) cfg.sigma2_grid = j["sigma2Grid"].get<std::vector<double>>();
    if (j.contains("reps")) cfg.reps = j["reps"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("Tmax")) cfg.t_max = j["Tmax"].get<std::size_t>();
    if (j.contains("level")) cfg.level = j["level"].get<double>();
    if (j.contains("outDir")) cfg.out_dir = j["outDir"].get<std::string>();
    if (j.contains("referenceSamples")) {
      cfg.reference_samples = j["referenceSamples"].get<std::size_t>();
    }
    if (j.contains("withOracle")) cfg.with_oracle = j["withOracle"].get<bool>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<std::size_t>();
    return cfg;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed config: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return config_from_json(j);
}

}  // namespace fedfisher::bench
