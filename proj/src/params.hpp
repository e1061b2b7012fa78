#pragma once

#include <span>
#include <string>
#include <vector>

namespace ctmsm {

enum class World { Observational, Experimental };

// Observational-world model coefficients. Every intensity is log-linear in the
// current state; marks, covariate transitions and the outcome are Gaussian.
// `baseline` vectors multiply the baseline covariates z (length p_Z); an empty
// vector is read as all zeros.

// log rate of treatment changes: intercept + covariate*l(t) + baseline.z
//   + dose*a(t-) + confounder*u
struct TreatmentRateCoefs {
  double intercept = 0.0;
  double covariate = 0.0;
  std::vector<double> baseline;
  double dose = 0.0;
  double confounder = 0.0;
};

// new dose ~ N(intercept + covariate*l(t) + baseline.z + dose*a(t-) + confounder*u, sigma)
struct DoseMarkCoefs {
  double intercept = 0.0;
  double covariate = 0.0;
  std::vector<double> baseline;
  double dose = 0.0;
  double confounder = 0.0;
  double sigma = 1.0;
};

// log rate of treatment termination: intercept + time*t + covariate*l(t-)
//   + baseline.z + dose*a(t-)
struct TerminationCoefs {
  double intercept = 0.0;
  double time = 0.0;
  double covariate = 0.0;
  std::vector<double> baseline;
  double dose = 0.0;
};

// l(t_k) ~ N(intercept + lag*l(t_{k-1}) + dose*a(t_k-) + baseline.z, sigma);
// the first grid value uses intercept + baseline.z.
struct CovariateCoefs {
  double intercept = 0.0;
  double lag = 0.0;
  double dose = 0.0;
  std::vector<double> baseline;
  double sigma = 1.0;
};

// y ~ N(intercept + dose*C(kernel) + covariate*l(t_max) + baseline.z
//   + confounder*u, sigma), C the exposure-kernel integral.
struct OutcomeCoefs {
  double intercept = 0.0;
  double dose = 0.0;
  double kernel = 0.0;
  double covariate = 0.0;
  std::vector<double> baseline;
  double confounder = 0.0;
  double sigma = 1.0;
};

struct ObsWorldParams {
  TreatmentRateCoefs rate;
  DoseMarkCoefs mark;
  TerminationCoefs termination;
  CovariateCoefs covariate;
  double confounder_prob = 0.5;  // P(U = 1)
  OutcomeCoefs outcome;
};

struct ExpRateCoefs {
  double intercept = 0.0;
  double dose = 0.0;
};

struct ExpMarkCoefs {
  double intercept = 0.0;
  double dose = 0.0;
  double sigma = 1.0;
};

struct ExpTerminationCoefs {
  double intercept = 0.0;
  double time = 0.0;
  double dose = 0.0;
};

// Experimental-world (interventional) models depend on the dose history only.
struct ExpWorldParams {
  ExpRateCoefs rate;
  ExpMarkCoefs mark;
  ExpTerminationCoefs termination;
};

double baseline_term(std::span<const double> coefs, std::span<const double> z);

// Returns every violated invariant; empty when the parameters are usable.
std::vector<std::string> check_params(const ObsWorldParams& theta, int p_z);
std::vector<std::string> check_params(const ExpWorldParams& alpha);

// Throws ErrorKind::Parameter listing the violations.
void require_valid(const ObsWorldParams& theta, int p_z);
void require_valid(const ExpWorldParams& alpha);

// Sets the confounding strength on both the change rate and the dose marks.
ObsWorldParams with_confounding(ObsWorldParams theta, double delta);

// Observational parameters with every covariate, baseline and confounder
// coefficient in the treatment and termination models removed, and the
// experimental parameters built from the remaining coefficients. Under these
// two parameterizations both worlds generate identical interventional parts.
ObsWorldParams strip_confounding(ObsWorldParams theta);
ExpWorldParams matching_experimental(const ObsWorldParams& theta);

}  // namespace ctmsm
