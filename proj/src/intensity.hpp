#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "event_paths.hpp"
#include "params.hpp"

namespace ctmsm {

// Piece of the refined partition of [0, t_max] (treatment-jump times and
// covariate-grid times) on which a(t-) and l(t) are both constant. On the
// open interior l(t-) == l(t) as well, so one value serves both histories.
struct StateSegment {
  double start = 0.0;
  double end = 0.0;
  double dose = 0.0;
  double cov = 0.0;
};

struct JumpState {
  double time = 0.0;
  double dose_before = 0.0;  // a(t_j-)
  double dose_after = 0.0;   // a(t_j)
  double cov = 0.0;          // l(t_j)
};

// One observed covariate value with the history that conditions it.
struct CovariateStep {
  double value = 0.0;
  double lag = 0.0;        // previous grid value (unused for the first point)
  double dose_left = 0.0;  // a(t_k-)
  bool first = false;
};

// Likelihood-ready view of one trajectory. Built once, read many times.
struct SubjectHistory {
  std::vector<StateSegment> states;
  std::vector<JumpState> jumps;
  std::vector<Segment> dose_segments;
  std::vector<CovariateStep> covariate_steps;
  std::vector<double> z;
  std::optional<int> u;
  double t_max = 0.0;
  int terminated = 0;
  double y = 0.0;
  double dose_end_left = 0.0;  // a(t_max-)
  double cov_end_left = 0.0;   // l(t_max-)
  double cov_end = 0.0;        // l(t_max)
};

SubjectHistory prepare_subject(const Trajectory& trajectory);
std::vector<SubjectHistory> prepare_dataset(std::span<const Trajectory> data);

// Inserts an extra partition point at t without changing any state value.
SubjectHistory with_breakpoint(SubjectHistory history, double t);

inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;

inline double log_normal_density(double x, double mean, double sigma) {
  const double r = (x - mean) / sigma;
  return -kHalfLogTwoPi - std::log(sigma) - 0.5 * r * r;
}

// ---- intensities -----------------------------------------------------------

double log_rate_A_obs(const ObsWorldParams& theta, double a_left, double l, std::span<const double> z,
                      int u);
double rate_A_obs(const ObsWorldParams& theta, double a_left, double l, std::span<const double> z, int u);
double rate_A_exp(const ExpWorldParams& alpha, double a_left);

double log_rate_Tmax_obs(const ObsWorldParams& theta, double t, double a_left, double l_left,
                         std::span<const double> z);
double rate_Tmax_obs(const ObsWorldParams& theta, double t, double a_left, double l_left,
                     std::span<const double> z);
double rate_Tmax_exp(const ExpWorldParams& alpha, double t, double a_left);

// Closed form of the integral of exp(c + b t) over [t1, t2].
double integrate_exp_linear(double c, double b, double t1, double t2);

// Exact integral over [t_begin, t_end] of exp(log_rate(segment) + slope * t)
// where log_rate is constant on every state segment.
template <class LogRate>
double cumulative_intensity(std::span<const StateSegment> segments, LogRate&& log_rate, double slope,
                            double t_begin, double t_end) {
  double total = 0.0;
  for (const auto& s : segments) {
    const double lo = std::max(s.start, t_begin);
    const double hi = std::min(s.end, t_end);
    if (hi <= lo) continue;
    total += integrate_exp_linear(log_rate(s), slope, lo, hi);
  }
  return total;
}

double cumulative_rate_A_obs(const SubjectHistory& h, const ObsWorldParams& theta, int u, double t_end);
double cumulative_rate_A_exp(const SubjectHistory& h, const ExpWorldParams& alpha, double t_end);
double cumulative_rate_Tmax_obs(const SubjectHistory& h, const ObsWorldParams& theta, double t_end);
double cumulative_rate_Tmax_exp(const SubjectHistory& h, const ExpWorldParams& alpha, double t_end);

// ---- jump marks -------------------------------------------------------------

double mark_mean_obs(const ObsWorldParams& theta, double a_left, double l, std::span<const double> z, int u);
double log_mark_density_obs(const ObsWorldParams& theta, double new_dose, double a_left, double l,
                            std::span<const double> z, int u);
double log_mark_density_exp(const ExpWorldParams& alpha, double new_dose, double a_left);

// ---- per-subject log-likelihood components ---------------------------------

// Treatment-process component split into the counting part (rate at jumps
// minus cumulative rate) and the mark part. Index [u] of the pair holds the
// value for U = u.
std::array<double, 2> log_lik_A_rate_pair(const SubjectHistory& h, const ObsWorldParams& theta);
std::array<double, 2> log_lik_A_mark_pair(const SubjectHistory& h, const ObsWorldParams& theta);
double log_lik_A_rate_exp(const SubjectHistory& h, const ExpWorldParams& alpha);
double log_lik_A_mark_exp(const SubjectHistory& h, const ExpWorldParams& alpha);

double log_lik_A(const SubjectHistory& h, const ObsWorldParams& theta, int u);
double log_lik_A(const SubjectHistory& h, const ExpWorldParams& alpha);
double log_lik_Tmax(const SubjectHistory& h, const ObsWorldParams& theta);
double log_lik_Tmax(const SubjectHistory& h, const ExpWorldParams& alpha);
double log_lik_L(const SubjectHistory& h, const ObsWorldParams& theta);
double outcome_mean(const SubjectHistory& h, const ObsWorldParams& theta, int u, double exposure);
double log_lik_Y(const SubjectHistory& h, const ObsWorldParams& theta, int u, double exposure);
std::array<double, 2> log_lik_Y_pair(const SubjectHistory& h, const ObsWorldParams& theta, double exposure);
double log_prior_U(int u, double theta_U);

// Trajectory-level conveniences.
double log_lik_A(const Trajectory& tr, const ObsWorldParams& theta, int u);
double log_lik_A(const Trajectory& tr, const ExpWorldParams& alpha);
double log_lik_Tmax(const Trajectory& tr, const ObsWorldParams& theta);
double log_lik_Tmax(const Trajectory& tr, const ExpWorldParams& alpha);
double log_lik_L(const Trajectory& tr, const ObsWorldParams& theta);
double log_lik_Y(const Trajectory& tr, const ObsWorldParams& theta, int u, double exposure);

}  // namespace ctmsm
