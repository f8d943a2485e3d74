#include "fedfisher/bench/csv.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fedfisher::bench {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string format_fixed4(double x) {
  if (!std::isfinite(x)) return format_double(x);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_results(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultHeader << '\n';
  for (const ResultRow& r : rows) {
    const bool probability = r.statistic == "coverage";
    out << csv_field(r.experiment) << ',' << csv_field(r.family) << ','
        << csv_field(r.covariates) << ',' << r.d << ',' << r.n << ',' << r.m << ','
        << (r.sigma2 ? format_double(*r.sigma2) : "") << ','
        << (r.t ? std::to_string(*r.t) : "") << ',' << csv_field(r.method) << ','
        << csv_field(r.statistic) << ','
        << (probability ? format_fixed4(r.value) : format_double(r.value)) << ',' << r.reps
        << ',' << (probability ? format_fixed4(r.mc_std_err) : format_double(r.mc_std_err))
        << ',' << r.skipped << '\n';
  }
}

void write_trace_rows(std::ostream& out, const IterateTrace& trace) {
  for (const IterateRecord& rec : trace.rounds) {
    out << to_string(trace.algorithm) << ',' << to_string(trace.init_kind) << ',' << rec.t << ','
        << format_double(rec.delta_o) << ',' << format_double(rec.delta_true) << ','
        << format_double(rec.grad_bar_norm) << ',' << rec.comm_scalars << '\n';
  }
}

void write_dataset(std::ostream& out, const std::vector<CenterData>& centers) {
  const std::size_t d = centers.empty() ? 0 : centers.front().dim();
  out << "center,row,y";
  for (std::size_t k = 1; k <= d; ++k) out << ",s" << k;
  out << '\n';
  char buf[40];
  for (const CenterData& c : centers) {
    for (std::size_t row = 0; row < c.size(); ++row) {
      const SampleRef s = c.sample(row);
      out << c.id() << ',' << row + 1 << ',';
      std::snprintf(buf, sizeof buf, "%.17g", s.y);
      out << buf;
      for (double x : s.s) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace fedfisher::bench
