#include "fedfisher/solver.hpp"

#include "fedfisher/stats.hpp"

#include <cmath>
#include <limits>

namespace fedfisher {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::MG: return "MG";
    case Algorithm::GM: return "GM";
    case Algorithm::CSL: return "CSL";
    case Algorithm::GlobalNewton: return "GL";
  }
  return "unknown";
}

std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::LocalMEst: return "local";
    case InitKind::AverageMEst: return "average";
    case InitKind::Custom: return "custom";
  }
  return "unknown";
}

std::string_view to_string(OneStepKind k) {
  switch (k) {
    case OneStepKind::MG_OS: return "MG_OS";
    case OneStepKind::GM_OS: return "GM_OS";
    case OneStepKind::CSL_OS: return "CSL_OS";
    case OneStepKind::AVG: return "AVG";
  }
  return "unknown";
}

double delta_o(const Vector& theta, const Vector& theta_star) {
  require_dim(static_cast<std::size_t>(theta.size()), static_cast<std::size_t>(theta_star.size()),
              "delta_o");
  const double norm = theta_star.norm();
  if (!(norm > 0.0)) throw NumericalError("delta_o: oracle estimator has zero norm");
  return (theta_star - theta).norm() / norm;
}

namespace {

Vector solve_spd(const Matrix& h, const Vector& g, const char* what) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
    throw NumericalError(std::string(what) + " is singular");
  }
  return llt.solve(g);
}

Vector solve_general(const Matrix& a, const Vector& b, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(a);
  if (!(lu.rcond() > 1e-14)) throw NumericalError(std::string(what) + " is singular");
  return lu.solve(b);
}

Vector oracle_estimator(const Federation& fed, const RunOptions& opts) {
  if (opts.theta_star) {
    require_dim(static_cast<std::size_t>(opts.theta_star->size()), fed.dim(), "theta_star");
    return *opts.theta_star;
  }
  const LocalFit fit = pooled_oracle_fit(fed, opts.newton);
  if (!fit.converged) throw NonConvergence("oracle M-estimation did not converge", {});
  return fit.theta_hat;
}

IterateRecord make_record(std::size_t t, const Vector& theta, double grad_norm,
                          const Vector& theta_star, const Vector& theta0, std::size_t comm) {
  IterateRecord r;
  r.t = t;
  r.theta = theta;
  r.grad_bar_norm = grad_norm;
  r.delta_o = delta_o(theta, theta_star);
  r.delta_true = (theta - theta0).norm();
  r.comm_scalars = comm;
  return r;
}

IterateTrace run_iterative(Algorithm algorithm, Federation& fed, std::size_t rounds,
                           const RunOptions& opts) {
  if (rounds < 1) throw std::invalid_argument("iterative run needs at least one round");
  IterateTrace trace;
  trace.algorithm = algorithm;
  trace.init_kind = opts.init;

  const MEstimatorRound mest = collect_m_estimators(fed, opts.newton);
  trace.comm += mest.comm;
  const Vector theta_star = oracle_estimator(fed, opts);
  const Vector& theta0 = fed.spec().theta0;

  Vector theta;
  switch (opts.init) {
    case InitKind::LocalMEst: theta = local_m_estimator(fed, opts.newton); break;
    case InitKind::AverageMEst: theta = mest.theta_bar; break;
    case InitKind::Custom:
      require_dim(static_cast<std::size_t>(opts.custom_init.size()), fed.dim(), "custom init");
      theta = opts.custom_init;
      break;
  }
  const double limit =
      opts.divergence_factor * std::max((theta - theta0).norm(), 1e-8);

  for (std::size_t t = 0; t < rounds; ++t) {
    const std::size_t comm_before = trace.comm.total_scalars();
    const GradientRound grads = broadcast_and_collect_gradients(fed, theta);
    trace.comm += grads.comm;
    trace.rounds.push_back(
        make_record(t, theta, grads.grad_bar.norm(), theta_star, theta0, comm_before));

    Vector step;
    try {
      switch (algorithm) {
        case Algorithm::MG:
          step = mg_estimate(mest.theta_hats, mest.theta_bar, grads.grads, grads.grad_bar, theta)
                     .solve(grads.grad_bar);
          break;
        case Algorithm::GM:
          step = gm_estimate(mest.theta_hats, mest.theta_bar, grads.grads, grads.grad_bar, theta)
                     .solve(grads.grad_bar);
          break;
        case Algorithm::CSL:
          step = solve_spd(local_hessian_at(fed, theta), grads.grad_bar, "local Hessian");
          break;
        case Algorithm::GlobalNewton:
          step = solve_spd(pooled_hessian_at(fed, theta), grads.grad_bar, "global Hessian");
          break;
      }
    } catch (const SingularDesign& e) {
      throw SingularDesign("round " + std::to_string(t + 1) + ": " + e.what(), e.condition(),
                           static_cast<long>(t + 1));
    }
    theta -= step;

    if (!theta.allFinite() || (theta - theta0).norm() > limit) {
      trace.status = TraceStatus::Diverged;
      const double g = theta.allFinite() ? pooled_gradient_at(fed, theta).norm()
                                         : std::numeric_limits<double>::quiet_NaN();
      IterateRecord last;
      last.t = t + 1;
      last.theta = theta;
      last.grad_bar_norm = g;
      last.delta_o = theta.allFinite() ? delta_o(theta, theta_star)
                                       : std::numeric_limits<double>::infinity();
      last.delta_true = theta.allFinite() ? (theta - theta0).norm()
                                          : std::numeric_limits<double>::infinity();
      last.comm_scalars = trace.comm.total_scalars();
      trace.rounds.push_back(std::move(last));
      return trace;
    }
  }
  // The final gradient norm is an evaluation metric, computed out-of-band.
  trace.rounds.push_back(make_record(rounds, theta, pooled_gradient_at(fed, theta).norm(),
                                     theta_star, theta0, trace.comm.total_scalars()));
  return trace;
}

}  // namespace

IterateTrace run_mg_newton(Federation& fed, std::size_t rounds, const RunOptions& opts) {
  return run_iterative(Algorithm::MG, fed, rounds, opts);
}
IterateTrace run_gm_newton(Federation& fed, std::size_t rounds, const RunOptions& opts) {
  return run_iterative(Algorithm::GM, fed, rounds, opts);
}
IterateTrace run_csl(Federation& fed, std::size_t rounds, const RunOptions& opts) {
  return run_iterative(Algorithm::CSL, fed, rounds, opts);
}
IterateTrace run_global_newton(Federation& fed, std::size_t rounds, const RunOptions& opts) {
  return run_iterative(Algorithm::GlobalNewton, fed, rounds, opts);
}
IterateTrace run_algorithm(Algorithm algorithm, Federation& fed, std::size_t rounds,
                           const RunOptions& opts) {
  return run_iterative(algorithm, fed, rounds, opts);
}

namespace {

// Bias adjustment for one Fisher estimate, with local moments taken at theta_a.
OneStepResult adjusted_one_step(OneStepKind kind, const Vector& theta_local,
                                const Vector& update, const Vector& theta_a,
                                const LocalMoments& moments, const Matrix& variance) {
  const Vector delta0 = theta_local - theta_a;
  OneStepResult res;
  res.kind = kind;
  res.corrections.q12_term =
      solve_spd(moments.q11, contract_circle(moments.q12, delta0), "local Q11 estimate");
  res.corrections.q_term =
      0.5 * solve_general(moments.h_a, contract_circle(moments.q, delta0), "local Hessian at theta^A");
  res.theta_os = update - res.corrections.q12_term + res.corrections.q_term;
  res.variance_hat = variance;
  return res;
}

}  // namespace

OneStepBundle one_step_all(Federation& fed, const OneStepOptions& opts) {
  OneStepBundle out;
  const MEstimatorRound mest = collect_m_estimators(fed, opts.newton);
  out.comm += mest.comm;
  out.theta_bar = mest.theta_bar;
  out.theta_local = local_m_estimator(fed, opts.newton);

  const GradientRound grads = broadcast_and_collect_gradients(fed, out.theta_local);
  out.comm += grads.comm;

  const FisherEstimate mg =
      mg_estimate(mest.theta_hats, mest.theta_bar, grads.grads, grads.grad_bar, out.theta_local);
  const FisherEstimate gm =
      gm_estimate(mest.theta_hats, mest.theta_bar, grads.grads, grads.grad_bar, out.theta_local);
  const Vector mg_update = out.theta_local - mg.solve(grads.grad_bar);
  const Vector gm_update = out.theta_local - gm.solve(grads.grad_bar);

  const LocalMoments at_bar = local_moments_at(fed, mest.theta_bar);
  Matrix variance = gm.matrix * at_bar.q11 * gm.matrix.transpose();
  variance = 0.5 * (variance + variance.transpose()).eval();

  if (opts.pilot == PilotKind::AverageMEst) {
    out.mg = adjusted_one_step(OneStepKind::MG_OS, out.theta_local, mg_update, mest.theta_bar,
                               at_bar, variance);
    out.gm = adjusted_one_step(OneStepKind::GM_OS, out.theta_local, gm_update, mest.theta_bar,
                               at_bar, variance);
  } else {
    out.mg = adjusted_one_step(OneStepKind::MG_OS, out.theta_local, mg_update, mg_update,
                               local_moments_at(fed, mg_update), variance);
    out.gm = adjusted_one_step(OneStepKind::GM_OS, out.theta_local, gm_update, gm_update,
                               local_moments_at(fed, gm_update), variance);
  }

  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(fed.dim()));
  out.csl.kind = OneStepKind::CSL_OS;
  out.csl.theta_os = out.theta_local - solve_spd(local_hessian_at(fed, out.theta_local),
                                                 grads.grad_bar, "local Hessian");
  out.csl.corrections = {zero, zero};
  out.csl.variance_hat = variance;

  out.avg.kind = OneStepKind::AVG;
  out.avg.theta_os = mest.theta_bar;
  out.avg.corrections = {zero, zero};
  out.avg.variance_hat = variance;
  return out;
}

OneStepResult one_step_mg(Federation& fed, const OneStepOptions& opts) {
  return one_step_all(fed, opts).mg;
}

OneStepResult one_step_gm(Federation& fed, const OneStepOptions& opts) {
  return one_step_all(fed, opts).gm;
}

std::vector<ConfidenceInterval> confidence_intervals(const OneStepResult& res, std::size_t n,
                                                     std::size_t m, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence level must lie in (0, 1)");
  }
  const auto d = res.theta_os.size();
  if (res.variance_hat.rows() != d || res.variance_hat.cols() != d) {
    throw DimensionMismatch("confidence_intervals: variance shape");
  }
  const double z = stats::normal_quantile(0.5 * (1.0 + level));
  const double total = static_cast<double>(n) * static_cast<double>(m);
  std::vector<ConfidenceInterval> out;
  out.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    const double v = res.variance_hat(j, j);
    if (!(v >= 0.0)) throw NumericalError("confidence_intervals: negative variance estimate");
    const double half = z * std::sqrt(v / total);
    out.push_back({static_cast<std::size_t>(j), res.theta_os[j] - half, res.theta_os[j] + half,
                   level});
  }
  return out;
}

}  // namespace fedfisher
