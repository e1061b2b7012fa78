#include "mle.hpp"

#include <cmath>
#include <limits>

#include "errors.hpp"
#include "msm.hpp"

namespace ctmsm {

namespace {

// Integrals of exp(b v) and v exp(b v) over [0, len].
double slope_base(double b, double len) {
  const double x = b * len;
  if (std::abs(x) < 1e-12) return len * (1.0 + 0.5 * x);
  return std::expm1(x) / b;
}

double slope_moment(double b, double len) {
  const double x = b * len;
  if (std::abs(x) < 1e-3) {
    return len * len * (0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0 + x * x * x * x / 144.0);
  }
  return (len * std::exp(x) - slope_base(b, len)) / b;
}

double freq_at(std::span<const double> freq, std::size_t i) { return freq.empty() ? 1.0 : freq[i]; }

void check_lengths(std::span<const SubjectHistory> data, std::span<const double> q1, std::span<const double> freq) {
  require(freq.empty() || freq.size() == data.size(), ErrorKind::Input, "frequency weights length mismatch");
  require(q1.empty() || q1.size() == data.size(), ErrorKind::Input, "u weights length mismatch");
}

std::size_t p_z_of(std::span<const SubjectHistory> data) { return data.empty() ? 0 : data.front().z.size(); }

// Row builder for designs with a fixed column count.
struct Rows {
  std::vector<double> x;
  std::vector<double> t1, t2, w;
  std::size_t cols = 0;
  void add(const std::vector<double>& row, double a, double b, double weight) {
    x.insert(x.end(), row.begin(), row.end());
    t1.push_back(a);
    t2.push_back(b);
    w.push_back(weight);
  }
};

ProcessDesign finish(Rows&& rows, Eigen::VectorXd event_sum, double event_time_sum, double event_count,
                     bool has_slope) {
  ProcessDesign d;
  const auto m = static_cast<Eigen::Index>(rows.w.size());
  const auto p = static_cast<Eigen::Index>(rows.cols);
  d.x.resize(m, p);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) d.x(r, c) = rows.x[static_cast<std::size_t>(r * p + c)];
  }
  d.t1 = Eigen::Map<Eigen::VectorXd>(rows.t1.data(), m);
  d.t2 = Eigen::Map<Eigen::VectorXd>(rows.t2.data(), m);
  d.w = Eigen::Map<Eigen::VectorXd>(rows.w.data(), m);
  d.exposure_time = (d.w.array() * (d.t2 - d.t1).array()).sum();
  d.event_sum = std::move(event_sum);
  d.event_time_sum = event_time_sum;
  d.event_count = event_count;
  d.has_slope = has_slope;
  return d;
}

std::size_t rate_cols(const RateColumns& c, std::size_t p_z) {
  return 1 + (c.covariate ? 1 : 0) + (c.baseline ? p_z : 0) + (c.dose ? 1 : 0) + (c.confounder ? 1 : 0);
}

void rate_row(std::vector<double>& row, const RateColumns& c, double cov, std::span<const double> z, double dose,
              double u) {
  row.clear();
  row.push_back(1.0);
  if (c.covariate) row.push_back(cov);
  if (c.baseline) row.insert(row.end(), z.begin(), z.end());
  if (c.dose) row.push_back(dose);
  if (c.confounder) row.push_back(u);
}

TreatmentRateCoefs unpack_rate(const Eigen::VectorXd& b, const RateColumns& c, std::size_t p_z) {
  TreatmentRateCoefs out;
  Eigen::Index k = 0;
  out.intercept = b[k++];
  if (c.covariate) out.covariate = b[k++];
  if (c.baseline) {
    out.baseline.resize(p_z);
    for (auto& v : out.baseline) v = b[k++];
  }
  if (c.dose) out.dose = b[k++];
  if (c.confounder) out.confounder = b[k++];
  return out;
}

struct WlsFit {
  Eigen::VectorXd beta;
  double sigma = 0.0;
};

WlsFit wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, const char* block) {
  const double sw = w.sum();
  require(sw > 0.0 && x.rows() > x.cols(), ErrorKind::DegenerateFit,
          std::string(block) + ": not enough observations for a regression fit");
  const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  const Eigen::MatrixXd xtwx = xtw * x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtwx);
  require(qr.rank() == x.cols(), ErrorKind::DegenerateFit, std::string(block) + ": design matrix is rank deficient");
  WlsFit f;
  f.beta = qr.solve(xtw * y);
  const Eigen::VectorXd r = y - x * f.beta;
  const double rss = (w.array() * r.array().square()).sum();
  f.sigma = std::sqrt(rss / sw);
  require(f.sigma > 0.0, ErrorKind::DegenerateFit, std::string(block) + ": zero residual variance");
  return f;
}

enum class UMode { None, Split };

struct GaussianRows {
  std::vector<double> x, y, w;
  std::size_t cols = 0;
  void add(const std::vector<double>& row, double value, double weight) {
    if (weight <= 0.0) return;
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(value);
    w.push_back(weight);
  }
  WlsFit fit(const char* block) const {
    const auto m = static_cast<Eigen::Index>(y.size());
    const auto p = static_cast<Eigen::Index>(cols);
    Eigen::MatrixXd xm(m, p);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < p; ++c) xm(r, c) = x[static_cast<std::size_t>(r * p + c)];
    }
    return wls(xm, Eigen::Map<const Eigen::VectorXd>(y.data(), m), Eigen::Map<const Eigen::VectorXd>(w.data(), m),
               block);
  }
};

DoseMarkCoefs fit_marks_obs(std::span<const SubjectHistory> data, UMode mode, std::span<const double> q1,
                            std::span<const double> freq) {
  const std::size_t p_z = p_z_of(data);
  GaussianRows g;
  g.cols = 3 + p_z + (mode == UMode::Split ? 1 : 0);
  std::vector<double> row;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double f = freq_at(freq, i);
    if (f == 0.0) continue;
    for (const auto& j : h.jumps) {
      row.assign({1.0, j.cov});
      row.insert(row.end(), h.z.begin(), h.z.end());
      row.push_back(j.dose_before);
      if (mode == UMode::Split) {
        row.push_back(0.0);
        g.add(row, j.dose_after, f * (1.0 - q1[i]));
        row.back() = 1.0;
        g.add(row, j.dose_after, f * q1[i]);
      } else {
        g.add(row, j.dose_after, f);
      }
    }
  }
  const auto fit = g.fit("dose-mark model");
  DoseMarkCoefs c;
  Eigen::Index k = 0;
  c.intercept = fit.beta[k++];
  c.covariate = fit.beta[k++];
  c.baseline.resize(p_z);
  for (auto& v : c.baseline) v = fit.beta[k++];
  c.dose = fit.beta[k++];
  if (mode == UMode::Split) c.confounder = fit.beta[k++];
  c.sigma = fit.sigma;
  return c;
}

CovariateCoefs fit_covariate(std::span<const SubjectHistory> data, std::span<const double> freq) {
  const std::size_t p_z = p_z_of(data);
  GaussianRows g;
  g.cols = 3 + p_z;
  std::vector<double> row;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double f = freq_at(freq, i);
    for (const auto& s : h.covariate_steps) {
      row.assign({1.0, s.first ? 0.0 : s.lag, s.first ? 0.0 : s.dose_left});
      row.insert(row.end(), h.z.begin(), h.z.end());
      g.add(row, s.value, f);
    }
  }
  const auto fit = g.fit("covariate model");
  CovariateCoefs c;
  c.intercept = fit.beta[0];
  c.lag = fit.beta[1];
  c.dose = fit.beta[2];
  c.baseline.resize(p_z);
  for (std::size_t k = 0; k < p_z; ++k) c.baseline[k] = fit.beta[static_cast<Eigen::Index>(3 + k)];
  c.sigma = fit.sigma;
  return c;
}

// Outcome regression profiled over the kernel decay.
OutcomeCoefs fit_outcome(std::span<const SubjectHistory> data, UMode mode, std::span<const double> q1,
                         std::span<const double> freq, double kernel_max) {
  const std::size_t p_z = p_z_of(data);
  const MsmData msm(data);
  auto regress = [&](double k, double* loglik) {
    GaussianRows g;
    g.cols = 3 + p_z + (mode == UMode::Split ? 1 : 0);
    std::vector<double> row;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& h = data[i];
      const double f = freq_at(freq, i);
      if (f == 0.0) continue;
      row.assign({1.0, msm.exposure(i, k), h.cov_end});
      row.insert(row.end(), h.z.begin(), h.z.end());
      if (mode == UMode::Split) {
        row.push_back(0.0);
        g.add(row, h.y, f * (1.0 - q1[i]));
        row.back() = 1.0;
        g.add(row, h.y, f * q1[i]);
      } else {
        g.add(row, h.y, f);
      }
    }
    WlsFit fit;
    try {
      fit = g.fit("outcome model");
    } catch (const Error&) {
      if (loglik) *loglik = -std::numeric_limits<double>::infinity();
      return fit;
    }
    double sw = 0.0;
    for (double v : g.w) sw += v;
    if (loglik) *loglik = -sw * (kHalfLogTwoPi + 0.5 + std::log(fit.sigma));
    return fit;
  };

  constexpr int kGrid = 40;
  int best = -1;
  double best_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> grid(kGrid + 1);
  for (int k = 0; k <= kGrid; ++k) {
    const double r = static_cast<double>(k) / kGrid;
    grid[static_cast<std::size_t>(k)] = kernel_max * r * r;
    double ll;
    regress(grid[static_cast<std::size_t>(k)], &ll);
    if (ll > best_ll) {
      best_ll = ll;
      best = k;
    }
  }
  require(best >= 0, ErrorKind::DegenerateFit, "outcome model: no kernel value gives an identified fit");
  const double lo = grid[static_cast<std::size_t>(std::max(best - 1, 0))];
  const double hi = grid[static_cast<std::size_t>(std::min(best + 1, kGrid))];
  auto br = brent_maximize(
      [&](double k) {
        double ll;
        regress(k, &ll);
        return ll;
      },
      lo, hi, 1e-6);
  double kernel = br.x;
  if (best_ll > br.value) kernel = grid[static_cast<std::size_t>(best)];
  const auto fit = regress(kernel, nullptr);
  require(fit.beta.size() > 0, ErrorKind::DegenerateFit, "outcome model: rank-deficient design");

  OutcomeCoefs c;
  Eigen::Index k = 0;
  c.intercept = fit.beta[k++];
  c.dose = fit.beta[k++];
  c.covariate = fit.beta[k++];
  c.kernel = kernel;
  c.baseline.resize(p_z);
  for (auto& v : c.baseline) v = fit.beta[k++];
  if (mode == UMode::Split) c.confounder = fit.beta[k++];
  c.sigma = fit.sigma;
  return c;
}

ProcessFit fit_or_throw(const ProcessDesign& d, const QuasiNewtonOptions& qn, const char* block,
                        std::vector<std::string>& trace) {
  auto fit = fit_process(d, qn);
  for (auto& t : fit.trace) trace.push_back(std::string(block) + ": " + t);
  if (!fit.converged) {
    std::string msg = std::string(block) + ": quasi-Newton fit did not converge";
    for (auto& t : fit.trace) msg += "; " + t;
    fail(ErrorKind::Optimizer, msg);
  }
  return fit;
}

TerminationCoefs unpack_termination(const Eigen::VectorXd& b, std::size_t p_z) {
  TerminationCoefs c;
  c.intercept = b[0];
  c.covariate = b[1];
  c.baseline.resize(p_z);
  for (std::size_t k = 0; k < p_z; ++k) c.baseline[k] = b[static_cast<Eigen::Index>(2 + k)];
  c.dose = b[static_cast<Eigen::Index>(2 + p_z)];
  c.time = b[static_cast<Eigen::Index>(3 + p_z)];
  return c;
}

ObsWorldParams fit_obs(std::span<const SubjectHistory> data, UMode mode, std::span<const double> q1,
                       std::span<const double> freq, const MleOptions& opt, std::vector<std::string>& trace) {
  const std::size_t p_z = p_z_of(data);
  ObsWorldParams th;
  RateColumns cols;
  cols.confounder = mode == UMode::Split;
  const auto rate = fit_or_throw(rate_design_obs(data, cols, q1, freq), opt.quasi_newton, "treatment-change rate", trace);
  th.rate = unpack_rate(rate.params, cols, p_z);
  th.mark = fit_marks_obs(data, mode, q1, freq);
  const auto term = fit_or_throw(termination_design_obs(data, freq), opt.quasi_newton, "termination rate", trace);
  th.termination = unpack_termination(term.params, p_z);
  if (opt.fit_covariate) th.covariate = fit_covariate(data, freq);
  if (opt.fit_outcome) th.outcome = fit_outcome(data, mode, q1, freq, opt.kernel_max);
  if (mode == UMode::Split) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      num += freq_at(freq, i) * q1[i];
      den += freq_at(freq, i);
    }
    th.confounder_prob = std::clamp(num / den, 1e-6, 1.0 - 1e-6);
  }
  return th;
}

}  // namespace

double process_loglik(const ProcessDesign& d, const Eigen::VectorXd& params, Eigen::VectorXd* grad) {
  const Eigen::Index p = d.x.cols();
  const auto beta = params.head(p);
  const double b = d.has_slope ? params[p] : 0.0;
  double ll = d.event_sum.dot(beta) + b * d.event_time_sum;
  if (grad) {
    grad->resize(params.size());
    grad->head(p) = d.event_sum;
    if (d.has_slope) (*grad)[p] = d.event_time_sum;
  }
  const Eigen::VectorXd eta = d.x * beta;
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    const double len = d.t2[r] - d.t1[r];
    if (len <= 0.0) continue;
    const double scale = d.w[r] * std::exp(eta[r] + b * d.t1[r]);
    const double i0 = slope_base(b, len);
    const double j0 = scale * i0;
    ll -= j0;
    if (grad) {
      grad->head(p) -= j0 * d.x.row(r).transpose();
      if (d.has_slope) (*grad)[p] -= scale * (d.t1[r] * i0 + slope_moment(b, len));
    }
  }
  return ll;
}

ProcessFit fit_process(const ProcessDesign& d, const QuasiNewtonOptions& opt) {
  const Eigen::Index p = d.x.cols() + (d.has_slope ? 1 : 0);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(p);
  const double events = std::max(d.event_count, 0.5);
  x0[0] = std::log(events / std::max(d.exposure_time, 1e-12));
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return process_loglik(d, x, &g); };
  const auto r = maximize_quasi_newton(f, x0, opt);
  ProcessFit out;
  out.params = r.x;
  out.loglik = r.value;
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.trace = r.trace;
  return out;
}

ProcessDesign rate_design_obs(std::span<const SubjectHistory> data, const RateColumns& c,
                              std::span<const double> q1, std::span<const double> freq) {
  check_lengths(data, q1, freq);
  require(!c.confounder || q1.size() == data.size(), ErrorKind::Input,
          "confounder column requires per-subject u weights");
  const std::size_t p_z = p_z_of(data);
  Rows rows;
  rows.cols = rate_cols(c, p_z);
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.cols));
  double count = 0.0;
  std::vector<double> row;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double f = freq_at(freq, i);
    if (f == 0.0) continue;
    const double q = c.confounder ? q1[i] : 0.0;
    for (const auto& s : h.states) {
      if (c.confounder) {
        if (q < 1.0) {
          rate_row(row, c, s.cov, h.z, s.dose, 0.0);
          rows.add(row, s.start, s.end, f * (1.0 - q));
        }
        if (q > 0.0) {
          rate_row(row, c, s.cov, h.z, s.dose, 1.0);
          rows.add(row, s.start, s.end, f * q);
        }
      } else {
        rate_row(row, c, s.cov, h.z, s.dose, 0.0);
        rows.add(row, s.start, s.end, f);
      }
    }
    for (const auto& j : h.jumps) {
      rate_row(row, c, j.cov, h.z, j.dose_before, q);
      ev += f * Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
      count += f;
    }
  }
  return finish(std::move(rows), std::move(ev), 0.0, count, false);
}

ProcessDesign termination_design_obs(std::span<const SubjectHistory> data, std::span<const double> freq) {
  check_lengths(data, {}, freq);
  const std::size_t p_z = p_z_of(data);
  Rows rows;
  rows.cols = 3 + p_z;
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.cols));
  double ev_time = 0.0, count = 0.0;
  std::vector<double> row;
  auto fill = [&](double cov, std::span<const double> z, double dose) {
    row.assign({1.0, cov});
    row.insert(row.end(), z.begin(), z.end());
    row.push_back(dose);
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double f = freq_at(freq, i);
    if (f == 0.0) continue;
    for (const auto& s : h.states) {
      fill(s.cov, h.z, s.dose);
      rows.add(row, s.start, s.end, f);
    }
    if (h.terminated == 1) {
      fill(h.cov_end_left, h.z, h.dose_end_left);
      ev += f * Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
      ev_time += f * h.t_max;
      count += f;
    }
  }
  return finish(std::move(rows), std::move(ev), ev_time, count, true);
}

ProcessDesign rate_design_exp(std::span<const SubjectHistory> data, std::span<const double> freq) {
  check_lengths(data, {}, freq);
  Rows rows;
  rows.cols = 2;
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(2);
  double count = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double f = freq_at(freq, i);
    if (f == 0.0) continue;
    for (const auto& s : h.dose_segments) rows.add({1.0, s.dose}, s.start, s.end, f);
    for (const auto& j : h.jumps) {
      ev[0] += f;
      ev[1] += f * j.dose_before;
      count += f;
    }
  }
  return finish(std::move(rows), std::move(ev), 0.0, count, false);
}

ProcessDesign termination_design_exp(std::span<const SubjectHistory> data, std::span<const double> freq) {
  check_lengths(data, {}, freq);
  Rows rows;
  rows.cols = 2;
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(2);
  double ev_time = 0.0, count = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double f = freq_at(freq, i);
    if (f == 0.0) continue;
    for (const auto& s : h.dose_segments) rows.add({1.0, s.dose}, s.start, s.end, f);
    if (h.terminated == 1) {
      ev[0] += f;
      ev[1] += f * h.dose_end_left;
      ev_time += f * h.t_max;
      count += f;
    }
  }
  return finish(std::move(rows), std::move(ev), ev_time, count, true);
}

MleResult fit_mle(std::span<const SubjectHistory> data, MleModel model, std::span<const double> freq,
                  const MleOptions& opt) {
  require(!data.empty(), ErrorKind::Input, "fit_mle: empty dataset");
  check_lengths(data, {}, freq);
  MleResult res;
  switch (model) {
    case MleModel::ObsIgnoreU:
      res.theta = fit_obs(data, UMode::None, {}, freq, opt, res.trace);
      break;
    case MleModel::ObsObservedU: {
      std::vector<double> q(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        require(data[i].u.has_value(), ErrorKind::Input,
                "observed-u fit needs u for every subject; subject index " + std::to_string(i) + " has none");
        q[i] = *data[i].u;
      }
      res.theta = fit_obs(data, UMode::Split, q, freq, opt, res.trace);
      break;
    }
    case MleModel::ExpMarginal: {
      const auto rate = fit_or_throw(rate_design_exp(data, freq), opt.quasi_newton, "experimental change rate", res.trace);
      res.alpha.rate = {rate.params[0], rate.params[1]};
      const auto term =
          fit_or_throw(termination_design_exp(data, freq), opt.quasi_newton, "experimental termination rate", res.trace);
      res.alpha.termination = {term.params[0], term.params[2], term.params[1]};
      GaussianRows g;
      g.cols = 2;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double f = freq_at(freq, i);
        if (f == 0.0) continue;
        for (const auto& j : data[i].jumps) g.add({1.0, j.dose_before}, j.dose_after, f);
      }
      const auto m = g.fit("experimental dose-mark model");
      res.alpha.mark = {m.beta[0], m.beta[1], m.sigma};
      break;
    }
  }
  res.converged = true;
  return res;
}

ObsWorldParams fit_obs_fractional_u(std::span<const SubjectHistory> data, std::span<const double> q1,
                                    std::span<const double> freq, const MleOptions& opt) {
  require(q1.size() == data.size(), ErrorKind::Input, "u weights length mismatch");
  std::vector<std::string> trace;
  return fit_obs(data, UMode::Split, q1, freq, opt, trace);
}

}  // namespace ctmsm
