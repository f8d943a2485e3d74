#include "fedfisher/bench/config.hpp"
#include "fedfisher/bench/experiments.hpp"
#include "fedfisher/bench/manifest.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace {

using fedfisher::bench::Experiment;
using fedfisher::bench::ExperimentConfig;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  bool fast = false;
};

void add_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "JSON experiment configuration");
  cmd.add_option("--seed", f.seed, "master seed");
  cmd.add_option("--reps", f.reps, "replications per cell");
  cmd.add_option("--threads", f.threads, "worker threads (0 = all cores)");
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_flag("--fast", f.fast, "trim the n and m grids to {100, 400}");
}

ExperimentConfig resolve(Experiment e, const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig::defaults(e)
                                          : fedfisher::bench::load_config(f.config);
  if (!f.config.empty() && cfg.experiment != e) {
    throw fedfisher::bench::ConfigError("config is for experiment '" +
                                        std::string(to_string(cfg.experiment)) + "'");
  }
  if (f.fast) cfg.apply_fast_preset();
  if (f.seed) cfg.seed = *f.seed;
  if (f.reps) cfg.reps = *f.reps;
  if (f.threads) cfg.threads = *f.threads;
  if (f.out) cfg.out_dir = *f.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Fisher-information estimation experiments"};
  app.set_version_flag("--version", fedfisher::bench::version_string());
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    Experiment experiment;
    std::function<int(const ExperimentConfig&)> run;
    bool any_experiment;  // gen and manifest follow the experiment named in --config
    Flags flags;
  };
  Command commands[] = {
      {"fisher-acc", "accuracy of the Fisher-information estimators", Experiment::FisherAccuracy,
       fedfisher::bench::cmd_fisher_accuracy, false, {}},
      {"iterate", "distributed Newton-type iterations", Experiment::Iterative,
       fedfisher::bench::cmd_iterative, false, {}},
      {"onestep", "one-step estimators and interval coverage", Experiment::OneStepCoverage,
       fedfisher::bench::cmd_onestep_coverage, false, {}},
      {"gen", "dump a simulated federation to dataset.csv", Experiment::OneStepCoverage,
       fedfisher::bench::cmd_gen, true, {}},
      {"manifest", "write manifest.json for a configuration", Experiment::FisherAccuracy,
       fedfisher::bench::cmd_manifest, true, {}},
  };
  for (Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_flags(*sub, c.flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (Command& c : commands) {
      if (!app.got_subcommand(c.name)) continue;
      Experiment e = c.experiment;
      if (c.any_experiment && !c.flags.config.empty()) {
        e = fedfisher::bench::load_config(c.flags.config).experiment;
      }
      return c.run(resolve(e, c.flags));
    }
  } catch (const fedfisher::bench::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
