#include "msm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "optim.hpp"

namespace ctmsm {

namespace {

constexpr double kSmallEta3 = 1e-10;

// Integral of exp(-k v) over [0, len].
double kernel_base(double k, double len) {
  if (k < kSmallEta3) return len;
  return -std::expm1(-k * len) / k;
}

// Integral of v exp(-k v) over [0, len].
double kernel_first_moment(double k, double len) {
  const double x = k * len;
  if (x < 1e-3) {
    // Series sum_n (-k)^n / n! * len^(n+2) / (n+2).
    const double l2 = len * len;
    return l2 * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0 + x * x * x * x / 144.0);
  }
  return (kernel_base(k, len) - len * std::exp(-x)) / k;
}

// Contribution of one segment: scale * exp(-k ulo) * int_0^len exp(-k v) dv,
// where scale = dose * t_max and [ulo, ulo + len] is the scaled distance to t_max.
inline double segment_value(double scale, double ulo, double len, double k) {
  if (k < kSmallEta3) return scale * len;
  return scale * std::exp(-k * ulo) * kernel_base(k, len);
}

inline double segment_derivative(double scale, double ulo, double len, double k) {
  return -scale * std::exp(-k * ulo) * (ulo * kernel_base(k, len) + kernel_first_moment(k, len));
}

void check_exposure_args(double t_max, double eta3) {
  require(t_max > 0.0 && std::isfinite(t_max), ErrorKind::Domain, "exposure_integral: t_max must be > 0");
  require(eta3 >= 0.0 && std::isfinite(eta3), ErrorKind::Domain, "exposure_integral: eta3 must be >= 0");
}

}  // namespace

double exposure_integral(std::span<const Segment> segments, double t_max, double eta3) {
  check_exposure_args(t_max, eta3);
  double total = 0.0;
  for (const auto& s : segments) {
    if (s.end <= s.start || s.dose == 0.0) continue;
    const double ulo = (t_max - s.end) / t_max;
    const double len = (s.end - s.start) / t_max;
    total += segment_value(s.dose * t_max, ulo, len, eta3);
  }
  return total;
}

double exposure_integral(const TreatmentPath& path, double t_max, double eta3) {
  check_exposure_args(t_max, eta3);
  const auto segs = path.segments(t_max);
  return exposure_integral(segs, t_max, eta3);
}

double exposure_integral_deta3(std::span<const Segment> segments, double t_max, double eta3) {
  check_exposure_args(t_max, eta3);
  double total = 0.0;
  for (const auto& s : segments) {
    if (s.end <= s.start || s.dose == 0.0) continue;
    const double ulo = (t_max - s.end) / t_max;
    const double len = (s.end - s.start) / t_max;
    total += segment_derivative(s.dose * t_max, ulo, len, eta3);
  }
  return total;
}

double msm_log_density(double y, double t_max, const TreatmentPath& path, const MsmParams& p) {
  require(p.sigma > 0.0, ErrorKind::Parameter, "msm sigma must be > 0");
  const double c = exposure_integral(path, t_max, p.eta3);
  return log_normal_density(y, p.eta1 + p.eta2 * c, p.sigma);
}

// ---- MsmData ---------------------------------------------------------------

MsmData::MsmData(std::span<const Trajectory> data) {
  offset_.push_back(0);
  for (const auto& tr : data) {
    const auto segs = tr.a_path.segments(tr.t_max);
    add(tr.y, tr.t_max, segs);
  }
}

MsmData::MsmData(std::span<const SubjectHistory> data) {
  offset_.push_back(0);
  for (const auto& h : data) add(h.y, h.t_max, h.dose_segments);
}

void MsmData::add(double y, double t_max, std::span<const Segment> segments) {
  require(t_max > 0.0, ErrorKind::Domain, "msm data: t_max must be > 0");
  y_.push_back(y);
  t_max_.push_back(t_max);
  for (const auto& s : segments) {
    if (s.end <= s.start || s.dose == 0.0) continue;
    seg_scale_.push_back(s.dose * t_max);
    seg_ulo_.push_back((t_max - s.end) / t_max);
    seg_len_.push_back((s.end - s.start) / t_max);
  }
  offset_.push_back(seg_scale_.size());
}

double MsmData::exposure(std::size_t i, double eta3) const {
  double total = 0.0;
  for (std::size_t k = offset_[i]; k < offset_[i + 1]; ++k) {
    total += segment_value(seg_scale_[k], seg_ulo_[k], seg_len_[k], eta3);
  }
  return total;
}

std::array<double, 2> MsmData::exposure_with_derivative(std::size_t i, double eta3) const {
  double c = 0.0, d = 0.0;
  for (std::size_t k = offset_[i]; k < offset_[i + 1]; ++k) {
    c += segment_value(seg_scale_[k], seg_ulo_[k], seg_len_[k], eta3);
    d += segment_derivative(seg_scale_[k], seg_ulo_[k], seg_len_[k], eta3);
  }
  return {c, d};
}

// ---- pseudo-likelihood -----------------------------------------------------

namespace {

void check_weights(const MsmData& data, std::span<const double> w) {
  require(w.size() == data.size(), ErrorKind::Input,
          "weight vector has length " + std::to_string(w.size()) + ", dataset has " +
              std::to_string(data.size()) + " subjects");
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0) {
      fail(ErrorKind::Input, "weight of subject index " + std::to_string(i) + " is not a finite value >= 0");
    }
  }
}

struct Profile {
  double objective = -std::numeric_limits<double>::infinity();
  double eta1 = 0.0, eta2 = 0.0, sigma = 0.0;
  bool degenerate = true;
};

Profile profile_at(const MsmData& data, std::span<const double> w, double eta3, std::vector<double>& x) {
  const std::size_t n = data.size();
  x.resize(n);
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) {
      x[i] = 0.0;
      continue;
    }
    x[i] = data.exposure(i, eta3);
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * data.y(i);
  }
  Profile p;
  const double xbar = sx / sw, ybar = sy / sw;
  double sxx = 0.0, sxy = 0.0, sxx_raw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    const double dx = x[i] - xbar;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (data.y(i) - ybar);
    sxx_raw += w[i] * x[i] * x[i];
  }
  if (!(sxx > 1e-12 * sxx_raw) || !std::isfinite(sxx)) return p;
  p.degenerate = false;
  p.eta2 = sxy / sxx;
  p.eta1 = ybar - p.eta2 * xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    const double r = data.y(i) - p.eta1 - p.eta2 * x[i];
    rss += w[i] * r * r;
  }
  const double s2 = rss / sw;
  p.sigma = std::sqrt(s2);
  p.objective = -0.5 * sw * (2.0 * kHalfLogTwoPi + 1.0 + std::log(s2));
  return p;
}

}  // namespace

double weighted_pseudo_loglik(const MsmData& data, std::span<const double> w, const MsmParams& p) {
  check_weights(data, w);
  require(p.sigma > 0.0, ErrorKind::Parameter, "msm sigma must be > 0");
  require(p.eta3 >= 0.0, ErrorKind::Domain, "eta3 must be >= 0");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double c = data.exposure(i, p.eta3);
    total += w[i] * log_normal_density(data.y(i), p.eta1 + p.eta2 * c, p.sigma);
  }
  return total;
}

std::array<double, 4> weighted_pseudo_loglik_gradient(const MsmData& data, std::span<const double> w,
                                                      const MsmParams& p) {
  check_weights(data, w);
  require(p.sigma > 0.0, ErrorKind::Parameter, "msm sigma must be > 0");
  require(p.eta3 >= 0.0, ErrorKind::Domain, "eta3 must be >= 0");
  std::array<double, 4> g{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    const auto [c, dc] = data.exposure_with_derivative(i, p.eta3);
    const double r = (data.y(i) - p.eta1 - p.eta2 * c) / p.sigma;
    const double s = w[i] * r / p.sigma;
    g[0] += s;
    g[1] += s * c;
    g[2] += s * p.eta2 * dc;
    g[3] += w[i] * (r * r - 1.0);
  }
  return g;
}

FitResult fit_msm(const MsmData& data, std::span<const double> w, const MsmFitOptions& opt) {
  check_weights(data, w);
  require(opt.eta3_max > 0.0, ErrorKind::Config, "eta3_max must be > 0");
  require(opt.grid_points >= 2, ErrorKind::Config, "eta3 grid needs at least 2 points");
  std::size_t positive = 0;
  for (double v : w) positive += v > 0.0 ? 1 : 0;
  require(positive >= 3, ErrorKind::DegenerateFit, "fit_msm needs at least 3 subjects with positive weight");

  FitResult res;
  std::vector<double> x;
  auto eval = [&](double eta3) {
    ++res.evaluations;
    return profile_at(data, w, eta3, x);
  };

  // Quadratic grid: dense near 0 where the kernel changes fastest.
  const int k_last = opt.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(k_last) + 1);
  int best = -1;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= k_last; ++k) {
    const double r = static_cast<double>(k) / k_last;
    grid[static_cast<std::size_t>(k)] = opt.eta3_max * r * r;
    const auto p = eval(grid[static_cast<std::size_t>(k)]);
    if (!p.degenerate && p.objective > best_obj) {
      best_obj = p.objective;
      best = k;
    }
  }
  if (best < 0) fail(ErrorKind::DegenerateFit, "weighted MSM design is rank deficient (exposures do not vary)");

  const double lo = grid[static_cast<std::size_t>(std::max(best - 1, 0))];
  const double hi = grid[static_cast<std::size_t>(std::min(best + 1, k_last))];
  const auto brent = brent_maximize([&](double e) { return eval(e).objective; }, lo, hi, opt.eta3_tol);

  double eta3 = brent.x;
  double obj = brent.value;
  // Brent never samples the bracket ends; compare against them directly.
  for (double edge : {lo, hi}) {
    if (edge != 0.0 && edge != opt.eta3_max) continue;
    const auto p = eval(edge);
    if (!p.degenerate && p.objective >= obj) {
      obj = p.objective;
      eta3 = edge;
    }
  }
  const auto fin = eval(eta3);
  if (fin.degenerate) fail(ErrorKind::DegenerateFit, "weighted MSM design is rank deficient at the optimum");
  if (!std::isfinite(fin.objective)) fail(ErrorKind::Optimizer, "MSM profile objective is not finite");

  res.params = {fin.eta1, fin.eta2, eta3, fin.sigma};
  res.objective = fin.objective;
  res.converged = brent.converged;
  res.at_lower_bound = eta3 <= opt.eta3_tol;
  res.at_upper_bound = eta3 >= opt.eta3_max - opt.eta3_tol;
  return res;
}

double profile_objective_grad_check(const MsmData& data, std::span<const double> w, const MsmParams& p) {
  const auto g = weighted_pseudo_loglik_gradient(data, w, p);
  constexpr double h = 1e-5;
  auto at = [&](int k, double step) {
    MsmParams q = p;
    switch (k) {
      case 0: q.eta1 += step; break;
      case 1: q.eta2 += step; break;
      case 2: q.eta3 += step; break;
      default: q.sigma = std::exp(std::log(p.sigma) + step); break;
    }
    return weighted_pseudo_loglik(data, w, q);
  };
  double dev = 0.0;
  for (int k = 0; k < 4; ++k) {
    // One-sided at the eta3 boundary.
    double fd;
    if (k == 2 && p.eta3 < h) {
      fd = (-3.0 * at(k, 0.0) + 4.0 * at(k, h) - at(k, 2.0 * h)) / (2.0 * h);
    } else {
      fd = (at(k, h) - at(k, -h)) / (2.0 * h);
    }
    dev = std::max(dev, std::abs(fd - g[static_cast<std::size_t>(k)]));
  }
  return dev;
}

}  // namespace ctmsm
