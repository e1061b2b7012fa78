#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace ctmsm {

// Percentile in [0, 100] by linear interpolation between order statistics:
// h = (n - 1) p / 100, x_(floor h) + (h - floor h)(x_(floor h + 1) - x_(floor h)).
double percentile(std::vector<double> values, double pct);
// Same over a sample where values[i] occurs multiplicity[i] times (integral).
double percentile_weighted(std::span<const double> values, std::span<const double> multiplicity, double pct);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> v);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Metrics {
  double bias = 0.0;
  double sd = 0.0;
  double se = 0.0;
  double cp95 = 0.0;  // percent
  double lci = 0.0;
  std::size_t count = 0;
  bool sd_defined = true;  // false with a single replication
};

// Table-style statistics of one parameter over replications: bias of the
// mean point, SD of points, mean replicate SD, coverage of the true value,
// mean interval length.
Metrics compute_metrics(std::span<const double> points, std::span<const double> replicate_sds,
                        std::span<const Interval> intervals, double truth);

// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
template <class Cdf>
double ks_distance(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double normal_cdf(double x);
// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

}  // namespace ctmsm
