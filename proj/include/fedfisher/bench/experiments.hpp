#pragma once

#include "fedfisher/bench/config.hpp"
#include "fedfisher/bench/csv.hpp"
#include "fedfisher/fisher.hpp"
#include "fedfisher/solver.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fedfisher::bench {

/// Seed of one replication, keyed by the experiment, the cell parameters and
/// the replication index. A cell's draws do not depend on which grid it sits in.
std::uint64_t replication_seed(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                               double sigma2, std::size_t rep);

/// Runs body(i) for i in [0, count) on `threads` workers (0 = hardware
/// concurrency). Each index is executed exactly once; callers write results
/// into slot i, so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

// ---- Fisher-information accuracy -------------------------------------------

inline constexpr std::array<FisherKind, 4> kFisherMethods = {
    FisherKind::LocalHessian, FisherKind::GlobalHessian, FisherKind::MG, FisherKind::GM};

struct FisherRep {
  bool ok = false;
  std::string failure;
  std::array<double, 4> delta1{};  ///< indexed like kFisherMethods
  std::array<double, 4> delta2{};
};

struct FisherCell {
  std::size_t n = 0;
  std::size_t m = 0;
  double sigma2 = 0.0;
  std::vector<FisherRep> reps;
  std::size_t skipped() const;
};

FisherRep run_fisher_rep(const ExperimentConfig& cfg, const Matrix& i0, std::size_t n,
                         std::size_t m, double sigma2, std::size_t rep);
FisherCell run_fisher_cell(const ExperimentConfig& cfg, const Matrix& i0, std::size_t n,
                           std::size_t m, double sigma2);
std::vector<ResultRow> summarize(const ExperimentConfig& cfg, const FisherCell& cell);

// ---- Iterative algorithms ----------------------------------------------------

inline constexpr std::array<Algorithm, 4> kIterativeMethods = {
    Algorithm::CSL, Algorithm::GlobalNewton, Algorithm::MG, Algorithm::GM};

struct IterativeRep {
  bool ok = false;
  std::string failure;
  std::array<IterateTrace, 4> traces;  ///< indexed like kIterativeMethods
};

struct IterativeCell {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<IterativeRep> reps;
  std::size_t skipped() const;
};

IterativeRep run_iterative_rep(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                               std::size_t rep);
IterativeCell run_iterative_cell(const ExperimentConfig& cfg, std::size_t n, std::size_t m);
/// delta_o values at round t for one method over completed, non-diverged reps.
std::vector<double> delta_o_at(const IterativeCell& cell, std::size_t method, std::size_t t);
std::vector<ResultRow> summarize(const ExperimentConfig& cfg, const IterativeCell& cell);

// ---- One-step estimators and coverage -----------------------------------------

struct OneStepRep {
  bool ok = false;
  std::string failure;
  OneStepBundle bundle;
  Vector theta_star;  ///< empty unless cfg.with_oracle
  std::vector<ConfidenceInterval> mg_ci;
  std::vector<ConfidenceInterval> gm_ci;
};

struct OneStepCell {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<OneStepRep> reps;
  std::size_t skipped() const;
  /// Fraction of successful reps whose interval for coordinate 0 covers theta0.
  double coverage(OneStepKind kind, const Vector& theta0) const;
};

OneStepRep run_onestep_rep(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                           std::size_t rep);
OneStepCell run_onestep_cell(const ExperimentConfig& cfg, std::size_t n, std::size_t m);
std::vector<ResultRow> summarize(const ExperimentConfig& cfg, const OneStepCell& cell);

// ---- CLI commands -------------------------------------------------------------
// Each writes its CSVs plus manifest.json under cfg.out_dir and returns the
// process exit code: 0 success, 3 when every replication of some cell failed.

int cmd_fisher_accuracy(const ExperimentConfig& cfg);
int cmd_iterative(const ExperimentConfig& cfg);
int cmd_onestep_coverage(const ExperimentConfig& cfg);
/// Dumps the federation for the first (n, m) of the grids to dataset.csv.
int cmd_gen(const ExperimentConfig& cfg);

/// Path of the reference-Fisher cache for a config.
std::string reference_cache_path(const ExperimentConfig& cfg);

}  // namespace fedfisher::bench
