#include "intensity.hpp"

#include <algorithm>

namespace ctmsm {

SubjectHistory prepare_subject(const Trajectory& tr) {
  require(tr.t_max > 0.0, ErrorKind::Domain, "prepare_subject: t_max must be > 0");
  SubjectHistory h;
  h.z = tr.z;
  h.u = tr.u;
  h.t_max = tr.t_max;
  h.terminated = tr.terminated;
  h.y = tr.y;

  const auto& path = tr.a_path;
  const auto& lp = tr.l_path;
  h.dose_segments = path.segments(tr.t_max);

  std::vector<double> cuts;
  cuts.reserve(path.jumps().size() + lp.grid().size() + 2);
  cuts.push_back(0.0);
  for (const auto& j : path.jumps()) {
    if (j.time > 0.0 && j.time < tr.t_max) cuts.push_back(j.time);
  }
  for (double g : lp.grid()) {
    if (g > 0.0 && g < tr.t_max) cuts.push_back(g);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(tr.t_max);

  h.states.reserve(cuts.size());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double s = cuts[k];
    h.states.push_back({s, cuts[k + 1], path.dose_at(s), lp.value_at(s)});
  }

  double prev = 0.0;
  for (const auto& j : path.jumps()) {
    if (j.time > tr.t_max) break;
    h.jumps.push_back({j.time, prev, j.dose, lp.value_at(j.time)});
    prev = j.dose;
  }

  const auto& grid = lp.grid();
  const auto& values = lp.values();
  for (std::size_t k = 0; k < grid.size() && k < values.size(); ++k) {
    CovariateStep step;
    step.value = values[k];
    step.first = (k == 0);
    step.lag = k == 0 ? 0.0 : values[k - 1];
    step.dose_left = grid[k] > 0.0 ? path.dose_left_limit(grid[k]) : 0.0;
    h.covariate_steps.push_back(step);
  }

  h.dose_end_left = path.dose_left_limit(tr.t_max);
  h.cov_end_left = lp.value_left_limit(tr.t_max);
  h.cov_end = lp.value_at(tr.t_max);
  return h;
}

std::vector<SubjectHistory> prepare_dataset(std::span<const Trajectory> data) {
  std::vector<SubjectHistory> out;
  out.reserve(data.size());
  for (const auto& tr : data) out.push_back(prepare_subject(tr));
  return out;
}

SubjectHistory with_breakpoint(SubjectHistory h, double t) {
  for (std::size_t k = 0; k < h.states.size(); ++k) {
    auto s = h.states[k];
    if (s.start < t && t < s.end) {
      StateSegment right = s;
      right.start = t;
      h.states[k].end = t;
      h.states.insert(h.states.begin() + static_cast<std::ptrdiff_t>(k) + 1, right);
      break;
    }
  }
  return h;
}

// ---- intensities -----------------------------------------------------------

double log_rate_A_obs(const ObsWorldParams& th, double a_left, double l, std::span<const double> z,
                      int u) {
  const auto& c = th.rate;
  return c.intercept + c.covariate * l + baseline_term(c.baseline, z) + c.dose * a_left +
         c.confounder * u;
}

double rate_A_obs(const ObsWorldParams& th, double a_left, double l, std::span<const double> z, int u) {
  return std::exp(log_rate_A_obs(th, a_left, l, z, u));
}

double rate_A_exp(const ExpWorldParams& al, double a_left) {
  return std::exp(al.rate.intercept + al.rate.dose * a_left);
}

double log_rate_Tmax_obs(const ObsWorldParams& th, double t, double a_left, double l_left,
                         std::span<const double> z) {
  const auto& c = th.termination;
  return c.intercept + c.time * t + c.covariate * l_left + baseline_term(c.baseline, z) +
         c.dose * a_left;
}

double rate_Tmax_obs(const ObsWorldParams& th, double t, double a_left, double l_left,
                     std::span<const double> z) {
  return std::exp(log_rate_Tmax_obs(th, t, a_left, l_left, z));
}

double rate_Tmax_exp(const ExpWorldParams& al, double t, double a_left) {
  const auto& c = al.termination;
  return std::exp(c.intercept + c.time * t + c.dose * a_left);
}

double integrate_exp_linear(double c, double b, double t1, double t2) {
  const double len = t2 - t1;
  if (len < 0.0) fail(ErrorKind::Internal, "cumulative intensity: negative segment length");
  if (len == 0.0) return 0.0;
  if (b == 0.0) return std::exp(c) * len;
  const double x = b * len;
  return std::exp(c + b * t1) * (std::expm1(x) / x) * len;
}

double cumulative_rate_A_obs(const SubjectHistory& h, const ObsWorldParams& th, int u, double t_end) {
  const double base = baseline_term(th.rate.baseline, h.z) + th.rate.intercept + th.rate.confounder * u;
  return cumulative_intensity(
      h.states, [&](const StateSegment& s) { return base + th.rate.covariate * s.cov + th.rate.dose * s.dose; },
      0.0, 0.0, t_end);
}

double cumulative_rate_A_exp(const SubjectHistory& h, const ExpWorldParams& al, double t_end) {
  return cumulative_intensity(
      h.states, [&](const StateSegment& s) { return al.rate.intercept + al.rate.dose * s.dose; }, 0.0, 0.0,
      t_end);
}

double cumulative_rate_Tmax_obs(const SubjectHistory& h, const ObsWorldParams& th, double t_end) {
  const auto& c = th.termination;
  const double base = c.intercept + baseline_term(c.baseline, h.z);
  return cumulative_intensity(
      h.states, [&](const StateSegment& s) { return base + c.covariate * s.cov + c.dose * s.dose; }, c.time,
      0.0, t_end);
}

double cumulative_rate_Tmax_exp(const SubjectHistory& h, const ExpWorldParams& al, double t_end) {
  const auto& c = al.termination;
  return cumulative_intensity(
      h.states, [&](const StateSegment& s) { return c.intercept + c.dose * s.dose; }, c.time, 0.0, t_end);
}

// ---- marks -----------------------------------------------------------------

double mark_mean_obs(const ObsWorldParams& th, double a_left, double l, std::span<const double> z, int u) {
  const auto& c = th.mark;
  return c.intercept + c.covariate * l + baseline_term(c.baseline, z) + c.dose * a_left + c.confounder * u;
}

double log_mark_density_obs(const ObsWorldParams& th, double new_dose, double a_left, double l,
                            std::span<const double> z, int u) {
  require(th.mark.sigma > 0.0, ErrorKind::Parameter, "sigma_A must be > 0");
  return log_normal_density(new_dose, mark_mean_obs(th, a_left, l, z, u), th.mark.sigma);
}

double log_mark_density_exp(const ExpWorldParams& al, double new_dose, double a_left) {
  require(al.mark.sigma > 0.0, ErrorKind::Parameter, "sigma_AE must be > 0");
  return log_normal_density(new_dose, al.mark.intercept + al.mark.dose * a_left, al.mark.sigma);
}

// ---- components ------------------------------------------------------------

std::array<double, 2> log_lik_A_rate_pair(const SubjectHistory& h, const ObsWorldParams& th) {
  const auto& c = th.rate;
  const double base = c.intercept + baseline_term(c.baseline, h.z);
  double at_jumps = 0.0;
  for (const auto& j : h.jumps) at_jumps += base + c.covariate * j.cov + c.dose * j.dose_before;
  double lambda0 = 0.0;
  for (const auto& s : h.states) {
    lambda0 += std::exp(base + c.covariate * s.cov + c.dose * s.dose) * (s.end - s.start);
  }
  const double njumps = static_cast<double>(h.jumps.size());
  return {at_jumps - lambda0, at_jumps + njumps * c.confounder - std::exp(c.confounder) * lambda0};
}

std::array<double, 2> log_lik_A_mark_pair(const SubjectHistory& h, const ObsWorldParams& th) {
  const auto& c = th.mark;
  require(c.sigma > 0.0, ErrorKind::Parameter, "sigma_A must be > 0");
  const double base = c.intercept + baseline_term(c.baseline, h.z);
  const double norm = -kHalfLogTwoPi - std::log(c.sigma);
  std::array<double, 2> out{0.0, 0.0};
  for (const auto& j : h.jumps) {
    const double mean = base + c.covariate * j.cov + c.dose * j.dose_before;
    const double r0 = (j.dose_after - mean) / c.sigma;
    const double r1 = (j.dose_after - (mean + c.confounder)) / c.sigma;
    out[0] += norm - 0.5 * r0 * r0;
    out[1] += norm - 0.5 * r1 * r1;
  }
  return out;
}

double log_lik_A_rate_exp(const SubjectHistory& h, const ExpWorldParams& al) {
  double at_jumps = 0.0;
  for (const auto& j : h.jumps) at_jumps += al.rate.intercept + al.rate.dose * j.dose_before;
  return at_jumps - cumulative_rate_A_exp(h, al, h.t_max);
}

double log_lik_A_mark_exp(const SubjectHistory& h, const ExpWorldParams& al) {
  double s = 0.0;
  for (const auto& j : h.jumps) s += log_mark_density_exp(al, j.dose_after, j.dose_before);
  return s;
}

double log_lik_A(const SubjectHistory& h, const ObsWorldParams& th, int u) {
  require(u == 0 || u == 1, ErrorKind::Domain, "u must be 0 or 1");
  return log_lik_A_rate_pair(h, th)[static_cast<std::size_t>(u)] +
         log_lik_A_mark_pair(h, th)[static_cast<std::size_t>(u)];
}

double log_lik_A(const SubjectHistory& h, const ExpWorldParams& al) {
  return log_lik_A_rate_exp(h, al) + log_lik_A_mark_exp(h, al);
}

double log_lik_Tmax(const SubjectHistory& h, const ObsWorldParams& th) {
  double out = -cumulative_rate_Tmax_obs(h, th, h.t_max);
  if (h.terminated == 1) out += log_rate_Tmax_obs(th, h.t_max, h.dose_end_left, h.cov_end_left, h.z);
  return out;
}

double log_lik_Tmax(const SubjectHistory& h, const ExpWorldParams& al) {
  double out = -cumulative_rate_Tmax_exp(h, al, h.t_max);
  if (h.terminated == 1) {
    const auto& c = al.termination;
    out += c.intercept + c.time * h.t_max + c.dose * h.dose_end_left;
  }
  return out;
}

double log_lik_L(const SubjectHistory& h, const ObsWorldParams& th) {
  const auto& c = th.covariate;
  const double base = c.intercept + baseline_term(c.baseline, h.z);
  double s = 0.0;
  for (const auto& st : h.covariate_steps) {
    const double mean = st.first ? base : base + c.lag * st.lag + c.dose * st.dose_left;
    s += log_normal_density(st.value, mean, c.sigma);
  }
  return s;
}

double outcome_mean(const SubjectHistory& h, const ObsWorldParams& th, int u, double exposure) {
  const auto& c = th.outcome;
  return c.intercept + c.dose * exposure + c.covariate * h.cov_end + baseline_term(c.baseline, h.z) +
         c.confounder * u;
}

double log_lik_Y(const SubjectHistory& h, const ObsWorldParams& th, int u, double exposure) {
  return log_normal_density(h.y, outcome_mean(h, th, u, exposure), th.outcome.sigma);
}

std::array<double, 2> log_lik_Y_pair(const SubjectHistory& h, const ObsWorldParams& th, double exposure) {
  const double m0 = outcome_mean(h, th, 0, exposure);
  return {log_normal_density(h.y, m0, th.outcome.sigma),
          log_normal_density(h.y, m0 + th.outcome.confounder, th.outcome.sigma)};
}

double log_prior_U(int u, double theta_U) {
  require(u == 0 || u == 1, ErrorKind::Domain, "u must be 0 or 1");
  require(theta_U > 0.0 && theta_U < 1.0, ErrorKind::Domain, "theta_U must lie in (0, 1)");
  return u == 1 ? std::log(theta_U) : std::log1p(-theta_U);
}

double log_lik_A(const Trajectory& tr, const ObsWorldParams& th, int u) {
  return log_lik_A(prepare_subject(tr), th, u);
}
double log_lik_A(const Trajectory& tr, const ExpWorldParams& al) { return log_lik_A(prepare_subject(tr), al); }
double log_lik_Tmax(const Trajectory& tr, const ObsWorldParams& th) {
  return log_lik_Tmax(prepare_subject(tr), th);
}
double log_lik_Tmax(const Trajectory& tr, const ExpWorldParams& al) {
  return log_lik_Tmax(prepare_subject(tr), al);
}
double log_lik_L(const Trajectory& tr, const ObsWorldParams& th) { return log_lik_L(prepare_subject(tr), th); }
double log_lik_Y(const Trajectory& tr, const ObsWorldParams& th, int u, double exposure) {
  return log_lik_Y(prepare_subject(tr), th, u, exposure);
}

}  // namespace ctmsm
