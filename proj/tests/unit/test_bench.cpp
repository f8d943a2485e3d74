#include "fedfisher/bench/config.hpp"
#include "fedfisher/bench/csv.hpp"
#include "fedfisher/bench/experiments.hpp"
#include "fedfisher/bench/manifest.hpp"

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace fedfisher;
using namespace fedfisher::bench;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fedfisher_unit_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FEDFISHER_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults and JSON round trip") {
  for (Experiment e : {Experiment::FisherAccuracy, Experiment::Iterative,
                       Experiment::OneStepCoverage}) {
    ExperimentConfig cfg = ExperimentConfig::defaults(e);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.reps == 500);
    CHECK(config_from_json(to_json(cfg)) == cfg);
    cfg.apply_fast_preset();
    CHECK(cfg.n_grid == std::vector<std::size_t>{100, 400});
    CHECK(cfg.m_grid == std::vector<std::size_t>{100, 400});
    CHECK(parse_experiment(to_string(e)) == e);
  }
  const ExperimentConfig it = ExperimentConfig::defaults(Experiment::Iterative);
  CHECK(it.family == Family::Poisson);
  CHECK(it.n_grid == std::vector<std::size_t>{100, 200, 400, 800});
}

TEST_CASE("partial JSON takes the experiment defaults") {
  const auto j = nlohmann::json::parse(R"({"experiment":"iterate","reps":7,"Tmax":5})");
  const ExperimentConfig cfg = config_from_json(j);
  CHECK(cfg.reps == 7);
  CHECK(cfg.t_max == 5);
  CHECK(cfg.family == Family::Poisson);
}

TEST_CASE("invalid configurations") {
  const auto bad = [](const char* text) { return config_from_json(nlohmann::json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"experiment":"nope"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"experiment":"onestep","family":"probit"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"experiment":"onestep","reps":"many"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"experiment":"onestep","unknownKey":1})"), ConfigError);

  ExperimentConfig cfg = ExperimentConfig::defaults(Experiment::OneStepCoverage);
  cfg.n_grid = {2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig::defaults(Experiment::FisherAccuracy);
  cfg.sigma2_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig::defaults(Experiment::OneStepCoverage);
  cfg.level = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("csv formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_fixed4(0.95) == "0.9500");
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");

  ResultRow row;
  row.experiment = "onestep";
  row.family = "logistic";
  row.covariates = "normal";
  row.d = 2;
  row.n = 100;
  row.m = 40;
  row.method = "MG_OS";
  row.statistic = "coverage";
  row.value = 0.95;
  row.reps = 20;
  std::ostringstream out;
  write_results(out, {row});
  CHECK(out.str() == std::string(kResultHeader) +
                         "\nonestep,logistic,normal,2,100,40,,,MG_OS,coverage,0.9500,20,0.0000,0\n");
}

TEST_CASE("replication seeds and parallel loop") {
  const ExperimentConfig cfg = ExperimentConfig::defaults(Experiment::OneStepCoverage);
  std::set<std::uint64_t> seeds;
  for (std::size_t rep = 0; rep < 100; ++rep) {
    seeds.insert(replication_seed(cfg, 100, 200, 0.0, rep));
    seeds.insert(replication_seed(cfg, 200, 100, 0.0, rep));
  }
  CHECK(seeds.size() == 200);

  for (std::size_t threads : {1u, 3u, 0u}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS(parallel_for(10, 2, [](std::size_t i) {
    if (i == 5) throw std::runtime_error("boom");
  }));
}

TEST_CASE("cells do not depend on thread count") {
  ExperimentConfig cfg = ExperimentConfig::defaults(Experiment::OneStepCoverage);
  cfg.reps = 6;
  cfg.threads = 1;
  const OneStepCell a = run_onestep_cell(cfg, 60, 10);
  cfg.threads = 3;
  const OneStepCell b = run_onestep_cell(cfg, 60, 10);
  for (std::size_t r = 0; r < 6; ++r) CHECK(a.reps[r].bundle.gm.theta_os == b.reps[r].bundle.gm.theta_os);
}

TEST_CASE("manifest contents") {
  ExperimentConfig cfg = ExperimentConfig::defaults(Experiment::FisherAccuracy);
  const auto j = make_manifest(cfg);
  CHECK(j.at("seed") == cfg.seed);
  CHECK(j.at("referenceFisherKeys").size() == 1);
  CHECK(config_from_json(j.at("config")) == cfg);
  CHECK(j.at("timestamp").get<std::string>().back() == 'Z');
  cfg.experiment = Experiment::Iterative;
  CHECK(reference_keys(cfg).empty());
}

TEST_CASE("cli exit codes and outputs") {
  const fs::path out = scratch("cli");
  CHECK(run_cli("gen --fast --out " + out.string()) == 0);
  const std::string data = slurp(out / "dataset.csv");
  CHECK(data.rfind("center,row,y,s1,s2\n1,1,", 0) == 0);
  CHECK(fs::exists(out / "manifest.json"));

  CHECK(run_cli("manifest --out " + (out / "m").string()) == 0);
  CHECK(fs::exists(out / "m" / "manifest.json"));

  const fs::path blocker = out / "file";
  std::ofstream(blocker) << "x";
  CHECK(run_cli("onestep --reps 1 --out " + (blocker / "sub").string()) == 2);

  const fs::path cfg = out / "bad.json";
  std::ofstream(cfg) << R"({"experiment":"onestep","d":0})";
  CHECK(run_cli("onestep --config " + cfg.string()) == 2);
  CHECK(run_cli("iterate --config " + cfg.string()) == 2);
  CHECK(run_cli("onestep --no-such-flag") == 2);

  // Every replication fails: m = 1 leaves the Fisher estimators singular.
  const fs::path fail = out / "fail.json";
  std::ofstream(fail) << R"({"experiment":"onestep","nGrid":[50],"mGrid":[1],"reps":2,)"
                      << R"("outDir":")" << (out / "fail").string() << R"("})";
  CHECK(run_cli("onestep --config " + fail.string()) == 3);
  fs::remove_all(out);
}
