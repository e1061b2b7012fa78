#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intensity.hpp"
#include "optim.hpp"
#include "params.hpp"

namespace ctmsm {

// Exposure pieces and events of a log-linear point process
//   log lambda(t) = x' beta + slope * t.
struct ProcessDesign {
  Eigen::MatrixXd x;          // one row per constant-state piece
  Eigen::VectorXd t1, t2, w;  // piece bounds and weights
  Eigen::VectorXd event_sum;  // sum over events of w * x
  double event_time_sum = 0.0;  // sum over events of w * t
  double event_count = 0.0;
  double exposure_time = 0.0;
  bool has_slope = false;
};

// Parameter vector is (beta, slope) when the design has a slope.
double process_loglik(const ProcessDesign& d, const Eigen::VectorXd& params, Eigen::VectorXd* grad);

struct ProcessFit {
  Eigen::VectorXd params;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> trace;
};

ProcessFit fit_process(const ProcessDesign& d, const QuasiNewtonOptions& options = {});

// Columns of the observational treatment-change design.
struct RateColumns {
  bool covariate = true;
  bool baseline = true;
  bool dose = true;
  bool confounder = false;
};

// Treatment-change process design. `q1[i]` is the weight of u = 1 for subject
// i (rows are split over u when the confounder column is used); `freq` holds
// per-subject frequency weights. Either span may be empty (all ones / unused).
ProcessDesign rate_design_obs(std::span<const SubjectHistory> data, const RateColumns& columns,
                              std::span<const double> q1, std::span<const double> freq);
ProcessDesign termination_design_obs(std::span<const SubjectHistory> data, std::span<const double> freq);
ProcessDesign rate_design_exp(std::span<const SubjectHistory> data, std::span<const double> freq);
ProcessDesign termination_design_exp(std::span<const SubjectHistory> data, std::span<const double> freq);

enum class MleModel { ObsIgnoreU, ObsObservedU, ExpMarginal };

struct MleOptions {
  QuasiNewtonOptions quasi_newton;
  bool fit_covariate = true;  // theta_L
  bool fit_outcome = true;    // theta_Y
  double kernel_max = 50.0;
};

struct MleResult {
  ObsWorldParams theta;  // set for the observational models
  ExpWorldParams alpha;  // set for ExpMarginal
  bool converged = false;
  std::vector<std::string> trace;
};

// Maximum-likelihood plug-in estimates. Throws Input when ObsObservedU meets
// a subject without u, Optimizer when a quasi-Newton fit does not converge.
MleResult fit_mle(std::span<const SubjectHistory> data, MleModel model, std::span<const double> freq = {},
                  const MleOptions& options = {});

// Observational fit with u replaced by per-subject probabilities q1 = P(u=1)
// (the M-step of EM). The confounder coefficients are estimated.
ObsWorldParams fit_obs_fractional_u(std::span<const SubjectHistory> data, std::span<const double> q1,
                                    std::span<const double> freq, const MleOptions& options = {});

}  // namespace ctmsm
