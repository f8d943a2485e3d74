#pragma once

#include <span>
#include <vector>

namespace fedfisher::stats {

/// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy
/// about 1e-16 over (0, 1).
double normal_quantile(double p);

double mean(std::span<const double> xs);
/// Standard error of the mean (sample sd / sqrt(n)); 0 for fewer than two values.
double std_error(std::span<const double> xs);

/// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> xs, double q);

/// Monte-Carlo standard error of the sample median from the order-statistic
/// confidence interval: (x_(u) - x_(l)) / (2 z_{0.975}).
double median_std_error(std::vector<double> xs);

}  // namespace fedfisher::stats
