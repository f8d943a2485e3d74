#pragma once

#include "fedfisher/center_data.hpp"
#include "fedfisher/solver.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedfisher::bench {

/// Shortest "%.10g" rendering with '.' decimal; nan/inf spelled out.
std::string format_double(double x);
/// Fixed four-decimal rendering (coverage probabilities).
std::string format_fixed4(double x);
/// RFC-4180 quoting when the field contains a comma, quote, or newline.
std::string csv_field(std::string_view s);

/// One aggregated statistic for one experiment cell and method.
struct ResultRow {
  std::string experiment;
  std::string family;
  std::string covariates;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::optional<double> sigma2;
  std::optional<std::size_t> t;
  std::string method;
  std::string statistic;
  double value = 0.0;
  std::size_t reps = 0;  ///< replications that entered the statistic
  double mc_std_err = 0.0;
  std::size_t skipped = 0;  ///< replications dropped (singular, non-convergent, diverged)
};

inline constexpr std::string_view kResultHeader =
    "experiment,family,covariates,d,n,m,sigma2,t,method,statistic,value,reps,mcStdErr,skipped";
inline constexpr std::string_view kTraceHeader =
    "algorithm,init,t,deltaO,deltaTrue,gradBarNorm,commScalars";
inline constexpr std::string_view kOneStepHeader = "kind,coord,estimate,lower,upper,covered";

void write_results(std::ostream& out, const std::vector<ResultRow>& rows);
void write_trace_rows(std::ostream& out, const IterateTrace& trace);

/// Dataset dump with header `center,row,y,s1..sd`.
void write_dataset(std::ostream& out, const std::vector<CenterData>& centers);

}  // namespace fedfisher::bench
