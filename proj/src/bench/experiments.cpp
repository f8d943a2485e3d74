#include "fedfisher/bench/experiments.hpp"

#include "fedfisher/bench/manifest.hpp"
#include "fedfisher/rng.hpp"
#include "fedfisher/stats.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

namespace fedfisher::bench {

namespace fs = std::filesystem;

std::uint64_t replication_seed(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                               double sigma2, std::size_t rep) {
  return derive_seed({cfg.seed, static_cast<std::uint64_t>(cfg.experiment), n, m,
                      std::bit_cast<std::uint64_t>(sigma2), rep});
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

template <typename Rep>
std::size_t count_skipped(const std::vector<Rep>& reps) {
  std::size_t k = 0;
  for (const Rep& r : reps) k += r.ok ? 0 : 1;
  return k;
}

ResultRow base_row(const ExperimentConfig& cfg, std::size_t n, std::size_t m) {
  ResultRow row;
  row.experiment = std::string(to_string(cfg.experiment));
  row.family = std::string(to_string(cfg.family));
  row.covariates = std::string(to_string(cfg.covariates));
  row.d = cfg.d;
  row.n = n;
  row.m = m;
  return row;
}

void log_failures(const char* what, std::size_t n, std::size_t m, std::size_t skipped,
                  std::size_t reps) {
  if (skipped > 0) {
    std::cerr << what << " n=" << n << " m=" << m << ": skipped " << skipped << " of " << reps
              << " replications\n";
  }
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

// ---- Fisher-information accuracy -------------------------------------------

std::size_t FisherCell::skipped() const { return count_skipped(reps); }

FisherRep run_fisher_rep(const ExperimentConfig& cfg, const Matrix& i0, std::size_t n,
                         std::size_t m, double sigma2, std::size_t rep) {
  FisherRep out;
  const std::uint64_t seed = replication_seed(cfg, n, m, sigma2, rep);
  const ModelSpec spec = cfg.model_spec(seed);
  try {
    Federation fed(spec, generate_federation(spec, m, n));
    const MEstimatorRound mest = collect_m_estimators(fed);

    Rng rng(derive_seed({seed, 0x7e7aULL}));
    Vector theta = spec.theta0;
    const double sd = std::sqrt(sigma2);
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += sd * rng.normal();

    const GradientRound grads = broadcast_and_collect_gradients(fed, theta);
    const std::array<FisherEstimate, 4> estimates = {
        local_hessian_estimate(fed, theta), global_hessian_estimate(fed, theta),
        mg_estimate(mest.theta_hats, mest.theta_bar, grads.grads, grads.grad_bar, theta),
        gm_estimate(mest.theta_hats, mest.theta_bar, grads.grads, grads.grad_bar, theta)};
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const FisherEstimate& e = estimates[k];
      out.delta1[k] = delta1(e.fisher(), i0);
      out.delta2[k] = e.kind == FisherKind::GM ? delta2_from_inverse(e.matrix, i0)
                                               : delta2(e.matrix, i0);
    }
    out.ok = true;
  } catch (const std::runtime_error& e) {
    out.failure = e.what();
  }
  return out;
}

FisherCell run_fisher_cell(const ExperimentConfig& cfg, const Matrix& i0, std::size_t n,
                           std::size_t m, double sigma2) {
  FisherCell cell;
  cell.n = n;
  cell.m = m;
  cell.sigma2 = sigma2;
  cell.reps.resize(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) {
    cell.reps[r] = run_fisher_rep(cfg, i0, n, m, sigma2, r);
  });
  log_failures("fisher-acc", n, m, cell.skipped(), cfg.reps);
  return cell;
}

std::vector<ResultRow> summarize(const ExperimentConfig& cfg, const FisherCell& cell) {
  std::vector<ResultRow> rows;
  for (std::size_t k = 0; k < kFisherMethods.size(); ++k) {
    for (int which = 1; which <= 2; ++which) {
      std::vector<double> values;
      for (const FisherRep& r : cell.reps) {
        if (r.ok) values.push_back(which == 1 ? r.delta1[k] : r.delta2[k]);
      }
      ResultRow row = base_row(cfg, cell.n, cell.m);
      row.sigma2 = cell.sigma2;
      row.method = std::string(to_string(kFisherMethods[k]));
      row.statistic = which == 1 ? "delta1" : "delta2";
      row.value = stats::mean(values);
      row.reps = values.size();
      row.mc_std_err = stats::std_error(values);
      row.skipped = cell.skipped();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string reference_cache_path(const ExperimentConfig& cfg) {
  return (fs::path(cfg.out_dir) / "reference_fisher.json").string();
}

int cmd_fisher_accuracy(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_out_dir(cfg);
  const ReferenceFisher ref = cached_reference_fisher(cfg.model_spec(0), cfg.reference_samples,
                                                      cfg.seed, reference_cache_path(cfg));
  std::vector<ResultRow> rows;
  bool all_failed = false;
  for (double sigma2 : cfg.sigma2_grid) {
    for (std::size_t n : cfg.n_grid) {
      for (std::size_t m : cfg.m_grid) {
        const FisherCell cell = run_fisher_cell(cfg, ref.mean, n, m, sigma2);
        all_failed |= cell.skipped() == cell.reps.size();
        auto cell_rows = summarize(cfg, cell);
        rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
      }
    }
  }
  auto out = open_output(fs::path(cfg.out_dir) / "fisher_accuracy.csv");
  write_results(out, rows);
  write_manifest(cfg);
  return all_failed ? 3 : 0;
}

// ---- Iterative algorithms ----------------------------------------------------

std::size_t IterativeCell::skipped() const { return count_skipped(reps); }

IterativeRep run_iterative_rep(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                               std::size_t rep) {
  IterativeRep out;
  const ModelSpec spec = cfg.model_spec(replication_seed(cfg, n, m, 0.0, rep));
  try {
    Federation fed(spec, generate_federation(spec, m, n));
    RunOptions opts;
    opts.init = InitKind::AverageMEst;
    const LocalFit oracle = pooled_oracle_fit(fed);
    if (!oracle.converged) throw NonConvergence("oracle fit did not converge", {});
    opts.theta_star = oracle.theta_hat;
    for (std::size_t k = 0; k < kIterativeMethods.size(); ++k) {
      out.traces[k] = run_algorithm(kIterativeMethods[k], fed, cfg.t_max, opts);
    }
    out.ok = true;
  } catch (const std::runtime_error& e) {
    out.failure = e.what();
  }
  return out;
}

IterativeCell run_iterative_cell(const ExperimentConfig& cfg, std::size_t n, std::size_t m) {
  IterativeCell cell;
  cell.n = n;
  cell.m = m;
  cell.reps.resize(cfg.reps);
  parallel_for(cfg.reps, cfg.threads,
               [&](std::size_t r) { cell.reps[r] = run_iterative_rep(cfg, n, m, r); });
  log_failures("iterate", n, m, cell.skipped(), cfg.reps);
  return cell;
}

std::vector<double> delta_o_at(const IterativeCell& cell, std::size_t method, std::size_t t) {
  std::vector<double> values;
  for (const IterativeRep& r : cell.reps) {
    if (!r.ok) continue;
    const IterateTrace& trace = r.traces[method];
    if (trace.status != TraceStatus::Completed || t >= trace.rounds.size()) continue;
    values.push_back(trace.rounds[t].delta_o);
  }
  return values;
}

std::vector<ResultRow> summarize(const ExperimentConfig& cfg, const IterativeCell& cell) {
  std::vector<ResultRow> rows;
  for (std::size_t k = 0; k < kIterativeMethods.size(); ++k) {
    std::size_t diverged = 0;
    for (const IterativeRep& r : cell.reps) {
      if (r.ok && r.traces[k].status == TraceStatus::Diverged) ++diverged;
    }
    for (std::size_t t = 0; t <= cfg.t_max; ++t) {
      const std::vector<double> values = delta_o_at(cell, k, t);
      const auto add = [&](const char* statistic, double value, double se) {
        ResultRow row = base_row(cfg, cell.n, cell.m);
        row.t = t;
        row.method = std::string(to_string(kIterativeMethods[k]));
        row.statistic = statistic;
        row.value = value;
        row.reps = values.size();
        row.mc_std_err = se;
        row.skipped = cell.skipped() + diverged;
        rows.push_back(std::move(row));
      };
      add("median_deltaO", stats::quantile(values, 0.5), stats::median_std_error(values));
      add("q25_deltaO", stats::quantile(values, 0.25), 0.0);
      add("q75_deltaO", stats::quantile(values, 0.75), 0.0);
      add("mean_deltaO", stats::mean(values), stats::std_error(values));
    }
  }
  return rows;
}

int cmd_iterative(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_out_dir(cfg);
  std::vector<ResultRow> rows;
  bool all_failed = false;
  for (std::size_t n : cfg.n_grid) {
    for (std::size_t m : cfg.m_grid) {
      const IterativeCell cell = run_iterative_cell(cfg, n, m);
      all_failed |= cell.skipped() == cell.reps.size();
      auto cell_rows = summarize(cfg, cell);
      rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());

      const std::string tag = "n" + std::to_string(n) + "_m" + std::to_string(m);
      auto trace_out = open_output(fs::path(cfg.out_dir) / "traces" / ("trace_" + tag + ".csv"));
      trace_out << kTraceHeader << '\n';
      for (const IterativeRep& r : cell.reps) {
        if (!r.ok) continue;
        for (const IterateTrace& trace : r.traces) write_trace_rows(trace_out, trace);
      }
      for (const IterativeRep& r : cell.reps) {
        if (!r.ok) continue;
        auto comm_out = open_output(fs::path(cfg.out_dir) / "traces" / ("commlog_" + tag + ".csv"));
        r.traces[2].comm.write_csv(comm_out);  // first successful MG run
        break;
      }
    }
  }
  auto out = open_output(fs::path(cfg.out_dir) / "iterative.csv");
  write_results(out, rows);
  write_manifest(cfg);
  return all_failed ? 3 : 0;
}

// ---- One-step estimators and coverage -----------------------------------------

std::size_t OneStepCell::skipped() const { return count_skipped(reps); }

double OneStepCell::coverage(OneStepKind kind, const Vector& theta0) const {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const OneStepRep& r : reps) {
    if (!r.ok) continue;
    const auto& ci = kind == OneStepKind::MG_OS ? r.mg_ci : r.gm_ci;
    ++total;
    hits += ci.front().contains(theta0[0]) ? 1 : 0;
  }
  return total == 0 ? std::nan("") : static_cast<double>(hits) / static_cast<double>(total);
}

OneStepRep run_onestep_rep(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                           std::size_t rep) {
  OneStepRep out;
  const ModelSpec spec = cfg.model_spec(replication_seed(cfg, n, m, 0.0, rep));
  try {
    Federation fed(spec, generate_federation(spec, m, n));
    out.bundle = one_step_all(fed);
    out.mg_ci = confidence_intervals(out.bundle.mg, n, m, cfg.level);
    out.gm_ci = confidence_intervals(out.bundle.gm, n, m, cfg.level);
    if (cfg.with_oracle) {
      const LocalFit oracle = pooled_oracle_fit(fed);
      if (!oracle.converged) throw NonConvergence("oracle fit did not converge", {});
      out.theta_star = oracle.theta_hat;
    }
    out.ok = true;
  } catch (const std::runtime_error& e) {
    out.failure = e.what();
  }
  return out;
}

OneStepCell run_onestep_cell(const ExperimentConfig& cfg, std::size_t n, std::size_t m) {
  OneStepCell cell;
  cell.n = n;
  cell.m = m;
  cell.reps.resize(cfg.reps);
  parallel_for(cfg.reps, cfg.threads,
               [&](std::size_t r) { cell.reps[r] = run_onestep_rep(cfg, n, m, r); });
  log_failures("onestep", n, m, cell.skipped(), cfg.reps);
  return cell;
}

std::vector<ResultRow> summarize(const ExperimentConfig& cfg, const OneStepCell& cell) {
  std::vector<ResultRow> rows;
  const Vector theta0 = cfg.model_spec(0).theta0;
  std::size_t ok = cell.reps.size() - cell.skipped();
  const auto add = [&](OneStepKind kind, const char* statistic, double value, double se,
                       std::size_t reps) {
    ResultRow row = base_row(cfg, cell.n, cell.m);
    row.method = std::string(to_string(kind));
    row.statistic = statistic;
    row.value = value;
    row.reps = reps;
    row.mc_std_err = se;
    row.skipped = cell.skipped();
    rows.push_back(std::move(row));
  };

  for (OneStepKind kind : {OneStepKind::MG_OS, OneStepKind::GM_OS}) {
    const double p = cell.coverage(kind, theta0);
    const double se = ok > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(ok)) : 0.0;
    add(kind, "coverage", p, se, ok);
    std::vector<double> widths;
    for (const OneStepRep& r : cell.reps) {
      if (!r.ok) continue;
      const auto& ci = kind == OneStepKind::MG_OS ? r.mg_ci : r.gm_ci;
      widths.push_back(ci.front().upper - ci.front().lower);
    }
    add(kind, "ci_width_mean", stats::mean(widths), stats::std_error(widths), widths.size());
  }

  for (OneStepKind kind :
       {OneStepKind::AVG, OneStepKind::CSL_OS, OneStepKind::GM_OS, OneStepKind::MG_OS}) {
    std::vector<double> to_truth;
    std::vector<double> to_oracle;
    for (const OneStepRep& r : cell.reps) {
      if (!r.ok) continue;
      const OneStepResult& res = kind == OneStepKind::MG_OS   ? r.bundle.mg
                                 : kind == OneStepKind::GM_OS ? r.bundle.gm
                                 : kind == OneStepKind::CSL_OS ? r.bundle.csl
                                                               : r.bundle.avg;
      to_truth.push_back((res.theta_os - theta0).norm());
      if (r.theta_star.size() > 0) to_oracle.push_back((res.theta_os - r.theta_star).norm());
    }
    add(kind, "dist_truth_mean", stats::mean(to_truth), stats::std_error(to_truth),
        to_truth.size());
    if (cfg.with_oracle) {
      add(kind, "dist_oracle_mean", stats::mean(to_oracle), stats::std_error(to_oracle),
          to_oracle.size());
    }
  }
  return rows;
}

int cmd_onestep_coverage(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_out_dir(cfg);
  const Vector theta0 = cfg.model_spec(0).theta0;
  std::vector<ResultRow> rows;
  bool all_failed = false;
  for (std::size_t n : cfg.n_grid) {
    for (std::size_t m : cfg.m_grid) {
      const OneStepCell cell = run_onestep_cell(cfg, n, m);
      all_failed |= cell.skipped() == cell.reps.size();
      auto cell_rows = summarize(cfg, cell);
      rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());

      const std::string tag = "n" + std::to_string(n) + "_m" + std::to_string(m);
      auto detail = open_output(fs::path(cfg.out_dir) / "intervals" / ("onestep_" + tag + ".csv"));
      detail << kOneStepHeader << '\n';
      for (const OneStepRep& r : cell.reps) {
        if (!r.ok) continue;
        for (OneStepKind kind : {OneStepKind::MG_OS, OneStepKind::GM_OS}) {
          const auto& ci = kind == OneStepKind::MG_OS ? r.mg_ci : r.gm_ci;
          const OneStepResult& res = kind == OneStepKind::MG_OS ? r.bundle.mg : r.bundle.gm;
          for (const ConfidenceInterval& c : ci) {
            detail << to_string(kind) << ',' << c.coordinate + 1 << ','
                   << format_double(res.theta_os[static_cast<Eigen::Index>(c.coordinate)]) << ','
                   << format_double(c.lower) << ',' << format_double(c.upper) << ','
                   << (c.contains(theta0[static_cast<Eigen::Index>(c.coordinate)]) ? 1 : 0)
                   << '\n';
          }
        }
      }
    }
  }
  auto out = open_output(fs::path(cfg.out_dir) / "onestep.csv");
  write_results(out, rows);
  write_manifest(cfg);
  return all_failed ? 3 : 0;
}

int cmd_gen(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_out_dir(cfg);
  const ModelSpec spec = cfg.model_spec(cfg.seed);
  const auto centers = generate_federation(spec, cfg.m_grid.front(), cfg.n_grid.front());
  auto out = open_output(fs::path(cfg.out_dir) / "dataset.csv");
  write_dataset(out, centers);
  write_manifest(cfg);
  return 0;
}

}  // namespace fedfisher::bench
