#include "posterior.hpp"

#include <cmath>
#include <limits>

#include "errors.hpp"
#include "msm.hpp"

namespace ctmsm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logistic(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void add_z(std::vector<std::string>& names, const std::string& stem, int p_z) {
  for (int k = 1; k <= p_z; ++k) names.push_back(stem + std::to_string(k));
}

double normal_log_density_unnormalized(double x, const NormalPrior& p) {
  const double r = (x - p.mean) / p.sd;
  return -0.5 * r * r - std::log(p.sd);
}

}  // namespace

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

const char* to_string(ThetaBlock b) noexcept {
  switch (b) {
    case ThetaBlock::A1: return "A1";
    case ThetaBlock::A2: return "A2";
    case ThetaBlock::Y: return "Y";
    case ThetaBlock::U: return "U";
    case ThetaBlock::Tmax: return "Tmax";
    case ThetaBlock::L: return "L";
  }
  return "?";
}

const char* to_string(AlphaBlock b) noexcept {
  switch (b) {
    case AlphaBlock::A1: return "ExpA1";
    case AlphaBlock::A2: return "ExpA2";
    case AlphaBlock::Tmax: return "ExpTmax";
  }
  return "?";
}

ThetaLayout::ThetaLayout(int p_z) : p_z_(p_z), blocks_(6) {
  require(p_z >= 0, ErrorKind::Config, "p_Z must be >= 0");
  auto mark = [&](ThetaBlock b, std::size_t from) {
    for (std::size_t k = from; k < names_.size(); ++k) blocks_[static_cast<std::size_t>(b)].push_back(static_cast<int>(k));
  };
  std::size_t from = names_.size();
  names_.insert(names_.end(), {"a1_0", "a1_L"});
  add_z(names_, "a1_Z", p_z);
  names_.insert(names_.end(), {"a1_a", "delta_rate"});
  mark(ThetaBlock::A1, from);

  from = names_.size();
  names_.insert(names_.end(), {"a2_0", "a2_L"});
  add_z(names_, "a2_Z", p_z);
  names_.insert(names_.end(), {"a2_a", "delta_mark", "log_sigma_A"});
  mark(ThetaBlock::A2, from);

  from = names_.size();
  names_.insert(names_.end(), {"c_0", "c_dose", "c_kernel", "c_L"});
  add_z(names_, "c_Z", p_z);
  names_.insert(names_.end(), {"c_U", "log_sigma_Y"});
  mark(ThetaBlock::Y, from);

  from = names_.size();
  names_.push_back("logit_theta_U");
  mark(ThetaBlock::U, from);

  from = names_.size();
  names_.insert(names_.end(), {"tm_0", "tm_t", "tm_L"});
  add_z(names_, "tm_Z", p_z);
  names_.push_back("tm_a");
  mark(ThetaBlock::Tmax, from);

  from = names_.size();
  names_.insert(names_.end(), {"l_0", "l_lag", "l_a"});
  add_z(names_, "l_Z", p_z);
  names_.push_back("log_sigma_L");
  mark(ThetaBlock::L, from);
}

int ThetaLayout::index(const std::string& name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return static_cast<int>(k);
  }
  return -1;
}

namespace {

std::vector<double> padded(const std::vector<double>& v, int p_z) {
  if (v.empty()) return std::vector<double>(static_cast<std::size_t>(p_z), 0.0);
  require(static_cast<int>(v.size()) == p_z, ErrorKind::Parameter, "baseline coefficient length does not match p_Z");
  return v;
}

}  // namespace

Eigen::VectorXd ThetaLayout::pack(const ObsWorldParams& t) const {
  std::vector<double> v;
  v.reserve(names_.size());
  auto zs = [&](const std::vector<double>& b) {
    for (double x : padded(b, p_z_)) v.push_back(x);
  };
  v.push_back(t.rate.intercept);
  v.push_back(t.rate.covariate);
  zs(t.rate.baseline);
  v.push_back(t.rate.dose);
  v.push_back(t.rate.confounder);

  v.push_back(t.mark.intercept);
  v.push_back(t.mark.covariate);
  zs(t.mark.baseline);
  v.push_back(t.mark.dose);
  v.push_back(t.mark.confounder);
  v.push_back(std::log(t.mark.sigma));

  v.push_back(t.outcome.intercept);
  v.push_back(t.outcome.dose);
  v.push_back(t.outcome.kernel);
  v.push_back(t.outcome.covariate);
  zs(t.outcome.baseline);
  v.push_back(t.outcome.confounder);
  v.push_back(std::log(t.outcome.sigma));

  v.push_back(std::log(t.confounder_prob) - std::log1p(-t.confounder_prob));

  v.push_back(t.termination.intercept);
  v.push_back(t.termination.time);
  v.push_back(t.termination.covariate);
  zs(t.termination.baseline);
  v.push_back(t.termination.dose);

  v.push_back(t.covariate.intercept);
  v.push_back(t.covariate.lag);
  v.push_back(t.covariate.dose);
  zs(t.covariate.baseline);
  v.push_back(std::log(t.covariate.sigma));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ObsWorldParams ThetaLayout::unpack(const Eigen::VectorXd& x) const {
  require(static_cast<std::size_t>(x.size()) == names_.size(), ErrorKind::Internal, "theta coordinate size mismatch");
  ObsWorldParams t;
  Eigen::Index k = 0;
  auto zs = [&](std::vector<double>& b) {
    b.resize(static_cast<std::size_t>(p_z_));
    for (auto& e : b) e = x[k++];
  };
  t.rate.intercept = x[k++];
  t.rate.covariate = x[k++];
  zs(t.rate.baseline);
  t.rate.dose = x[k++];
  t.rate.confounder = x[k++];

  t.mark.intercept = x[k++];
  t.mark.covariate = x[k++];
  zs(t.mark.baseline);
  t.mark.dose = x[k++];
  t.mark.confounder = x[k++];
  t.mark.sigma = std::exp(x[k++]);

  t.outcome.intercept = x[k++];
  t.outcome.dose = x[k++];
  t.outcome.kernel = x[k++];
  t.outcome.covariate = x[k++];
  zs(t.outcome.baseline);
  t.outcome.confounder = x[k++];
  t.outcome.sigma = std::exp(x[k++]);

  t.confounder_prob = logistic(x[k++]);

  t.termination.intercept = x[k++];
  t.termination.time = x[k++];
  t.termination.covariate = x[k++];
  zs(t.termination.baseline);
  t.termination.dose = x[k++];

  t.covariate.intercept = x[k++];
  t.covariate.lag = x[k++];
  t.covariate.dose = x[k++];
  zs(t.covariate.baseline);
  t.covariate.sigma = std::exp(x[k++]);
  return t;
}

AlphaLayout::AlphaLayout()
    : names_{"e1_0", "e1_a", "e2_0", "e2_a", "log_sigma_AE", "et_0", "et_t", "et_a"},
      blocks_{{0, 1}, {2, 3, 4}, {5, 6, 7}} {}

int AlphaLayout::index(const std::string& name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return static_cast<int>(k);
  }
  return -1;
}

Eigen::VectorXd AlphaLayout::pack(const ExpWorldParams& a) const {
  Eigen::VectorXd x(8);
  x << a.rate.intercept, a.rate.dose, a.mark.intercept, a.mark.dose, std::log(a.mark.sigma), a.termination.intercept,
      a.termination.time, a.termination.dose;
  return x;
}

ExpWorldParams AlphaLayout::unpack(const Eigen::VectorXd& x) const {
  require(x.size() == 8, ErrorKind::Internal, "alpha coordinate size mismatch");
  ExpWorldParams a;
  a.rate = {x[0], x[1]};
  a.mark = {x[2], x[3], std::exp(x[4])};
  a.termination = {x[5], x[6], x[7]};
  return a;
}

double marginal_loglik_obs(std::span<const SubjectHistory> data, const ObsWorldParams& th) {
  require(th.confounder_prob > 0.0 && th.confounder_prob < 1.0, ErrorKind::Domain, "theta_U must lie in (0, 1)");
  const double lp0 = log_prior_U(0, th.confounder_prob);
  const double lp1 = log_prior_U(1, th.confounder_prob);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& h = data[i];
    const double c = exposure_integral(h.dose_segments, h.t_max, th.outcome.kernel);
    const auto r = log_lik_A_rate_pair(h, th);
    const auto m = log_lik_A_mark_pair(h, th);
    const auto y = log_lik_Y_pair(h, th, c);
    const double term = log_sum_exp(r[0] + m[0] + y[0] + lp0, r[1] + m[1] + y[1] + lp1) + log_lik_L(h, th) +
                        log_lik_Tmax(h, th);
    if (!std::isfinite(term)) {
      fail(ErrorKind::Evaluation, "non-finite log-likelihood term for subject index " + std::to_string(i));
    }
    total += term;
  }
  return total;
}

double log_prior_theta(const ThetaLayout& layout, const Eigen::VectorXd& x, const Priors& priors) {
  const int kernel = layout.index("c_kernel");
  if (!x.allFinite() || x[kernel] < 0.0) return kNegInf;
  const double lu = x[layout.index("logit_theta_U")];
  // Uniform(0, 1) on theta_U expressed on the logit coordinate.
  const double p = logistic(lu);
  double lp = std::log(p) + std::log1p(-p);
  if (!std::isfinite(lp)) return kNegInf;
  for (const auto& [name, prior] : priors.normal) {
    const int k = layout.index(name);
    if (k >= 0) lp += normal_log_density_unnormalized(x[k], prior);
  }
  return lp;
}

double log_prior_alpha(const AlphaLayout& layout, const Eigen::VectorXd& x, const Priors& priors) {
  if (!x.allFinite()) return kNegInf;
  double lp = 0.0;
  for (const auto& [name, prior] : priors.normal) {
    const int k = layout.index(name);
    if (k >= 0) lp += normal_log_density_unnormalized(x[k], prior);
  }
  return lp;
}

double log_posterior_obs(std::span<const SubjectHistory> data, const ObsWorldParams& th, const Priors& priors) {
  if (!(th.confounder_prob > 0.0 && th.confounder_prob < 1.0)) return kNegInf;
  if (!(th.mark.sigma > 0.0) || !(th.outcome.sigma > 0.0) || !(th.covariate.sigma > 0.0)) return kNegInf;
  if (!(th.outcome.kernel >= 0.0)) return kNegInf;
  const ThetaLayout layout(data.empty() ? 0 : static_cast<int>(data.front().z.size()));
  const double lp = log_prior_theta(layout, layout.pack(th), priors);
  if (lp == kNegInf) return kNegInf;
  return marginal_loglik_obs(data, th) + lp;
}

double exp_loglik(std::span<const SubjectHistory> data, const ExpWorldParams& al) {
  double total = 0.0;
  for (const auto& h : data) total += log_lik_A(h, al) + log_lik_Tmax(h, al);
  return total;
}

double conditional_posterior_u(const SubjectHistory& h, const ObsWorldParams& th) {
  const double c = exposure_integral(h.dose_segments, h.t_max, th.outcome.kernel);
  const auto r = log_lik_A_rate_pair(h, th);
  const auto m = log_lik_A_mark_pair(h, th);
  const auto y = log_lik_Y_pair(h, th, c);
  const double g0 = r[0] + m[0] + y[0] + log_prior_U(0, th.confounder_prob);
  const double g1 = r[1] + m[1] + y[1] + log_prior_U(1, th.confounder_prob);
  return logistic(g1 - g0);
}

double conditional_posterior_u(const Trajectory& tr, const ObsWorldParams& th) {
  return conditional_posterior_u(prepare_subject(tr), th);
}

}  // namespace ctmsm
