#include "params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace ctmsm {

double baseline_term(std::span<const double> coefs, std::span<const double> z) {
  if (coefs.empty()) return 0.0;
  require(coefs.size() == z.size(), ErrorKind::Parameter,
          "baseline coefficient length " + std::to_string(coefs.size()) +
              " does not match p_Z = " + std::to_string(z.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) s += coefs[k] * z[k];
  return s;
}

namespace {

void check_baseline(std::vector<std::string>& out, const std::vector<double>& v, int p_z,
                    const char* name) {
  if (!v.empty() && static_cast<int>(v.size()) != p_z) {
    out.push_back(std::string(name) + " has length " + std::to_string(v.size()) +
                  ", expected p_Z = " + std::to_string(p_z));
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      out.push_back(std::string(name) + " contains a non-finite value");
      break;
    }
  }
}

void check_finite(std::vector<std::string>& out, double x, const char* name) {
  if (!std::isfinite(x)) out.push_back(std::string(name) + " is not finite");
}

void check_positive(std::vector<std::string>& out, double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) out.push_back(std::string(name) + " must be > 0");
}

std::string join(const std::vector<std::string>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? "; " : "") << items[i];
  return os.str();
}

}  // namespace

std::vector<std::string> check_params(const ObsWorldParams& t, int p_z) {
  std::vector<std::string> out;
  check_finite(out, t.rate.intercept, "a1_0");
  check_finite(out, t.rate.covariate, "a1_L");
  check_baseline(out, t.rate.baseline, p_z, "a1_Z");
  check_finite(out, t.rate.dose, "a1_a");
  check_finite(out, t.rate.confounder, "delta_rate");

  check_finite(out, t.mark.intercept, "a2_0");
  check_finite(out, t.mark.covariate, "a2_L");
  check_baseline(out, t.mark.baseline, p_z, "a2_Z");
  check_finite(out, t.mark.dose, "a2_a");
  check_finite(out, t.mark.confounder, "delta_mark");
  check_positive(out, t.mark.sigma, "sigma_A");

  check_finite(out, t.termination.intercept, "tm_0");
  check_finite(out, t.termination.time, "tm_t");
  check_finite(out, t.termination.covariate, "tm_L");
  check_baseline(out, t.termination.baseline, p_z, "tm_Z");
  check_finite(out, t.termination.dose, "tm_a");

  check_finite(out, t.covariate.intercept, "l_0");
  check_finite(out, t.covariate.lag, "l_lag");
  check_finite(out, t.covariate.dose, "l_a");
  check_baseline(out, t.covariate.baseline, p_z, "l_Z");
  check_positive(out, t.covariate.sigma, "sigma_L");

  if (!(t.confounder_prob > 0.0 && t.confounder_prob < 1.0)) {
    out.push_back("theta_U must lie in (0, 1)");
  }

  check_finite(out, t.outcome.intercept, "c_0");
  check_finite(out, t.outcome.dose, "c_dose");
  if (!(t.outcome.kernel >= 0.0) || !std::isfinite(t.outcome.kernel)) {
    out.push_back("c_kernel must be >= 0");
  }
  check_finite(out, t.outcome.covariate, "c_L");
  check_baseline(out, t.outcome.baseline, p_z, "c_Z");
  check_finite(out, t.outcome.confounder, "c_U");
  check_positive(out, t.outcome.sigma, "sigma_Y");
  return out;
}

std::vector<std::string> check_params(const ExpWorldParams& a) {
  std::vector<std::string> out;
  check_finite(out, a.rate.intercept, "e1_0");
  check_finite(out, a.rate.dose, "e1_a");
  check_finite(out, a.mark.intercept, "e2_0");
  check_finite(out, a.mark.dose, "e2_a");
  check_positive(out, a.mark.sigma, "sigma_AE");
  check_finite(out, a.termination.intercept, "et_0");
  check_finite(out, a.termination.time, "et_t");
  check_finite(out, a.termination.dose, "et_a");
  return out;
}

void require_valid(const ObsWorldParams& theta, int p_z) {
  auto v = check_params(theta, p_z);
  if (!v.empty()) fail(ErrorKind::Parameter, "invalid observational parameters: " + join(v));
}

void require_valid(const ExpWorldParams& alpha) {
  auto v = check_params(alpha);
  if (!v.empty()) fail(ErrorKind::Parameter, "invalid experimental parameters: " + join(v));
}

ObsWorldParams with_confounding(ObsWorldParams theta, double delta) {
  theta.rate.confounder = delta;
  theta.mark.confounder = delta;
  return theta;
}

ObsWorldParams strip_confounding(ObsWorldParams theta) {
  theta.rate.covariate = 0.0;
  theta.rate.confounder = 0.0;
  std::fill(theta.rate.baseline.begin(), theta.rate.baseline.end(), 0.0);
  theta.mark.covariate = 0.0;
  theta.mark.confounder = 0.0;
  std::fill(theta.mark.baseline.begin(), theta.mark.baseline.end(), 0.0);
  theta.termination.covariate = 0.0;
  std::fill(theta.termination.baseline.begin(), theta.termination.baseline.end(), 0.0);
  return theta;
}

ExpWorldParams matching_experimental(const ObsWorldParams& theta) {
  ExpWorldParams a;
  a.rate = {theta.rate.intercept, theta.rate.dose};
  a.mark = {theta.mark.intercept, theta.mark.dose, theta.mark.sigma};
  a.termination = {theta.termination.intercept, theta.termination.time, theta.termination.dose};
  return a;
}

}  // namespace ctmsm
