#pragma once

#include <span>
#include <utility>
#include <vector>

namespace locfuse {

/// Linear-interpolation percentile (q in [0, 1]) of an ascending sample.
double percentile_sorted(std::span<const double> sorted, double q);

/// Fraction of samples strictly below `threshold`.
double fraction_below(std::span<const double> errors, double threshold);

struct ErrorStats {
  std::size_t count{0};
  double median{0.0};
  double mean{0.0};
  double rmse{0.0};
  double max{0.0};
  std::vector<std::pair<double, double>> percentiles;  // (q, value)
  std::vector<std::pair<double, double>> cdf;          // (threshold, P(err < threshold))
};

inline constexpr double kReportedPercentiles[] = {0.05, 0.25, 0.5, 0.75, 0.9, 0.95};

/// Throws DomainError on empty input.
ErrorStats error_stats(std::span<const double> errors, std::span<const double> thresholds);

/// Evenly spaced thresholds [0, max] used for exported CDFs.
std::vector<double> cdf_grid(double max = 10.0, double step = 0.05);

struct MetricsReport {
  ErrorStats horizontal;
  ErrorStats vertical;
  ErrorStats spatial;
  double p_2d_below_1m{0.0};
  double p_vertical_below_0_2m{0.0};
  double p_3d_below_1m{0.0};
};

MetricsReport make_report(std::span<const double> err_2d, std::span<const double> err_vertical,
                          std::span<const double> err_3d, std::span<const double> thresholds);

}  // namespace locfuse
