#include "stats.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"

namespace ctmsm {

double percentile(std::vector<double> v, double pct) {
  require(!v.empty(), ErrorKind::Domain, "percentile of an empty sample");
  require(pct >= 0.0 && pct <= 100.0, ErrorKind::Domain, "percentile must lie in [0, 100]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

double percentile_weighted(std::span<const double> values, std::span<const double> mult, double pct) {
  require(values.size() == mult.size(), ErrorKind::Domain, "percentile: multiplicity length mismatch");
  std::vector<double> expanded;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto m = static_cast<long>(std::lround(mult[i]));
    for (long k = 0; k < m; ++k) expanded.push_back(values[i]);
  }
  return percentile(std::move(expanded), pct);
}

double mean(std::span<const double> v) {
  require(!v.empty(), ErrorKind::Domain, "mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Metrics compute_metrics(std::span<const double> points, std::span<const double> sds,
                        std::span<const Interval> intervals, double truth) {
  require(!points.empty(), ErrorKind::Domain, "compute_metrics: no replications");
  require(sds.size() == points.size() && intervals.size() == points.size(), ErrorKind::Domain,
          "compute_metrics: inconsistent lengths");
  Metrics m;
  m.count = points.size();
  m.bias = mean(points) - truth;
  m.sd = sample_sd(points);
  m.sd_defined = points.size() >= 2;
  m.se = mean(sds);
  double covered = 0.0, length = 0.0;
  for (const auto& iv : intervals) {
    if (iv.lo <= truth && truth <= iv.hi) covered += 1.0;
    length += iv.hi - iv.lo;
  }
  m.cp95 = 100.0 * covered / static_cast<double>(intervals.size());
  m.lci = length / static_cast<double>(intervals.size());
  return m;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double chi_square_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

}  // namespace ctmsm
