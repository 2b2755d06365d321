#include "locfuse/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "locfuse/errors.hpp"

namespace locfuse {

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("percentile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double fraction_below(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw DomainError("fraction_below of an empty sample");
  const auto n = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < threshold; });
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

ErrorStats error_stats(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw DomainError("error_stats needs at least one sample");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());

  ErrorStats s;
  s.count = sorted.size();
  s.median = percentile_sorted(sorted, 0.5);
  double sum = 0.0, sq = 0.0;
  for (double e : sorted) {
    sum += e;
    sq += e * e;
  }
  s.mean = sum / static_cast<double>(s.count);
  s.rmse = std::sqrt(sq / static_cast<double>(s.count));
  s.max = sorted.back();
  for (double q : kReportedPercentiles) s.percentiles.emplace_back(q, percentile_sorted(sorted, q));
  for (double t : thresholds) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    s.cdf.emplace_back(t, static_cast<double>(below) / static_cast<double>(s.count));
  }
  return s;
}

std::vector<double> cdf_grid(double max, double step) {
  std::vector<double> grid;
  const auto n = static_cast<int>(std::lround(max / step));
  for (int i = 0; i <= n; ++i) grid.push_back(step * i);
  return grid;
}

MetricsReport make_report(std::span<const double> err_2d, std::span<const double> err_vertical,
                          std::span<const double> err_3d, std::span<const double> thresholds) {
  MetricsReport r;
  r.horizontal = error_stats(err_2d, thresholds);
  r.vertical = error_stats(err_vertical, thresholds);
  r.spatial = error_stats(err_3d, thresholds);
  r.p_2d_below_1m = fraction_below(err_2d, 1.0);
  r.p_vertical_below_0_2m = fraction_below(err_vertical, 0.2);
  r.p_3d_below_1m = fraction_below(err_3d, 1.0);
  return r;
}

}  // namespace locfuse
