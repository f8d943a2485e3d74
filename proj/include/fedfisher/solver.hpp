#pragma once

#include "fedfisher/comm.hpp"
#include "fedfisher/fisher.hpp"
#include "fedfisher/types.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace fedfisher {

enum class Algorithm { MG, GM, CSL, GlobalNewton };
enum class InitKind { LocalMEst, AverageMEst, Custom };
enum class TraceStatus { Completed, Diverged };

std::string_view to_string(Algorithm a);
std::string_view to_string(InitKind k);

struct IterateRecord {
  std::size_t t = 0;
  Vector theta;
  double grad_bar_norm = 0.0;  ///< ||l_bar(theta_t)||
  double delta_o = 0.0;        ///< relative distance to the oracle estimator
  double delta_true = 0.0;     ///< ||theta_t - theta0||
  std::size_t comm_scalars = 0;
};

struct IterateTrace {
  Algorithm algorithm = Algorithm::MG;
  InitKind init_kind = InitKind::AverageMEst;
  TraceStatus status = TraceStatus::Completed;
  std::vector<IterateRecord> rounds;  ///< rounds[0] is the initial estimator
  CommLog comm;

  const Vector& final_theta() const { return rounds.back().theta; }
};

struct RunOptions {
  InitKind init = InitKind::AverageMEst;
  Vector custom_init;                ///< used when init == Custom
  std::optional<Vector> theta_star;  ///< oracle estimator; fitted on demand when absent
  NewtonSettings newton;
  /// A trace is aborted as Diverged once ||theta_t - theta0|| exceeds this
  /// multiple of the initial distance.
  double divergence_factor = 10.0;
};

/// Newton-like iteration with the MG Fisher estimate:
/// theta_{t+1} = theta_t - I0_hat(theta_t)^{-1} l_bar(theta_t).
IterateTrace run_mg_newton(Federation& fed, std::size_t rounds, const RunOptions& opts = {});
/// theta_{t+1} = theta_t - Omega_hat(theta_t) l_bar(theta_t).
IterateTrace run_gm_newton(Federation& fed, std::size_t rounds, const RunOptions& opts = {});
/// Surrogate-likelihood baseline, local Hessian in place of the global one.
IterateTrace run_csl(Federation& fed, std::size_t rounds, const RunOptions& opts = {});
/// Newton with the pooled Hessian (oracle baseline; Hessian is out-of-band).
IterateTrace run_global_newton(Federation& fed, std::size_t rounds, const RunOptions& opts = {});

IterateTrace run_algorithm(Algorithm algorithm, Federation& fed, std::size_t rounds,
                           const RunOptions& opts = {});

enum class OneStepKind { MG_OS, GM_OS, CSL_OS, AVG };
enum class PilotKind { AverageMEst, OneStepUpdate };

std::string_view to_string(OneStepKind k);

struct OneStepCorrections {
  Vector q12_term;  ///< Q11_hat^{-1} (Q12_hat o Delta0_hat), subtracted
  Vector q_term;    ///< (1/2) (H^A)^{-1} (Q_hat o Delta0_hat), added
};

struct OneStepResult {
  Vector theta_os;
  OneStepKind kind = OneStepKind::MG_OS;
  OneStepCorrections corrections;
  Matrix variance_hat;  ///< Omega_hat(theta0~) Q11_hat Omega_hat(theta0~)^T
};

struct OneStepOptions {
  NewtonSettings newton;
  /// theta^A: the M-estimator average (default), or the unadjusted one-step update.
  PilotKind pilot = PilotKind::AverageMEst;
};

/// All four one-step estimators from one shared communication exchange
/// (M-estimators once, gradients at the local M-estimator once).
struct OneStepBundle {
  OneStepResult mg;
  OneStepResult gm;
  OneStepResult csl;
  OneStepResult avg;
  Vector theta_local;  ///< the initial estimator theta0~
  Vector theta_bar;
  CommLog comm;
};

OneStepBundle one_step_all(Federation& fed, const OneStepOptions& opts = {});
OneStepResult one_step_mg(Federation& fed, const OneStepOptions& opts = {});
OneStepResult one_step_gm(Federation& fed, const OneStepOptions& opts = {});

struct ConfidenceInterval {
  std::size_t coordinate = 0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;

  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

/// Per-coordinate Wald intervals theta_j +/- z sqrt(V_jj / (n m)).
std::vector<ConfidenceInterval> confidence_intervals(const OneStepResult& res, std::size_t n,
                                                     std::size_t m, double level);

/// ||theta* - theta|| / ||theta*||
double delta_o(const Vector& theta, const Vector& theta_star);

}  // namespace fedfisher
