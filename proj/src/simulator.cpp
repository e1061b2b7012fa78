#include "simulator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"
#include "intensity.hpp"
#include "msm.hpp"
#include "parallel.hpp"

namespace ctmsm {

namespace {

void check_step_probability(double rate, double dt, double t, const char* name) {
  if (!(rate * dt < 1.0)) {
    std::ostringstream os;
    os << name << " * dt = " << rate * dt << " >= 1 at t = " << t << "; reduce dt";
    fail(ErrorKind::Config, os.str());
  }
}

}  // namespace

Trajectory simulate_subject(const ScenarioConfig& cfg, World world, RngStream& rng, std::int64_t id) {
  const auto& th = cfg.obs_params;
  const auto& al = cfg.exp_params;
  const bool observational = world == World::Observational;
  const long steps = std::lround(cfg.t_R / cfg.dt);
  const long l_every = std::max(1L, std::lround(cfg.delta_L / cfg.dt));

  Trajectory tr;
  tr.id = id;
  tr.z.resize(static_cast<std::size_t>(cfg.p_Z));
  for (auto& v : tr.z) v = rng.normal();
  const int u = rng.bernoulli(th.confounder_prob) ? 1 : 0;
  tr.u = u;

  const auto& lc = th.covariate;
  const double l_base = lc.intercept + baseline_term(lc.baseline, tr.z);

  std::vector<double> l_grid{0.0};
  std::vector<double> l_values{l_base + lc.sigma * rng.normal()};
  std::vector<DoseJump> jumps;
  double a = 0.0;
  double l = l_values.front();
  double t_max = cfg.t_R;
  int terminated = 0;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    if (k > 0 && k % l_every == 0) {
      l = l_base + lc.lag * l + lc.dose * a + lc.sigma * rng.normal();
      l_grid.push_back(t);
      l_values.push_back(l);
    }
    if (k > 0) {
      const double rate = observational ? rate_A_obs(th, a, l, tr.z, u) : rate_A_exp(al, a);
      check_step_probability(rate, cfg.dt, t, "treatment change rate");
      if (rng.uniform() < rate * cfg.dt) {
        const double mean = observational ? mark_mean_obs(th, a, l, tr.z, u) : al.mark.intercept + al.mark.dose * a;
        const double sd = observational ? th.mark.sigma : al.mark.sigma;
        double next = mean + sd * rng.normal();
        while (next == a) next = mean + sd * rng.normal();
        jumps.push_back({t, next});
        a = next;
      }
    }
    const double t_next = static_cast<double>(k + 1) * cfg.dt;
    // Termination probability is capped at 1: a huge rate ends treatment at
    // the first step instead of failing.
    const double rate_t =
        observational ? rate_Tmax_obs(th, t_next, a, l, tr.z) : rate_Tmax_exp(al, t_next, a);
    if (rng.uniform() < std::min(1.0, rate_t * cfg.dt)) {
      t_max = k + 1 == steps ? cfg.t_R : t_next;
      terminated = 1;
      break;
    }
  }

  tr.t_max = t_max;
  tr.terminated = terminated;
  tr.a_path = TreatmentPath(std::move(jumps), t_max);
  tr.l_path = CovariatePath(std::move(l_grid), std::move(l_values));

  const auto& oc = th.outcome;
  const double exposure = exposure_integral(tr.a_path, t_max, oc.kernel);
  const double mean = oc.intercept + oc.dose * exposure + oc.covariate * tr.l_path.value_at(t_max) +
                      baseline_term(oc.baseline, tr.z) + oc.confounder * u;
  tr.y = mean + oc.sigma * rng.normal();
  return tr;
}

std::vector<Trajectory> simulate_dataset(const ScenarioConfig& cfg, World world, int n, std::uint64_t seed,
                                         std::uint64_t replication, int threads) {
  require(n >= 1, ErrorKind::Config, "simulate_dataset: n must be >= 1");
  {
    auto issues = validate(cfg);
    if (!issues.empty()) {
      std::string msg = "invalid scenario:";
      for (auto& m : issues) msg += " " + m + ";";
      fail(ErrorKind::Config, msg);
    }
  }
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    RngStream rng(derive_seed(seed, {replication}), i);
    out[i] = simulate_subject(cfg, world, rng, static_cast<std::int64_t>(i) + 1);
  });
  return out;
}

DatasetMoments empirical_moments(const std::vector<Trajectory>& data) {
  require(!data.empty(), ErrorKind::Domain, "empirical_moments: empty dataset");
  DatasetMoments m;
  m.n = data.size();
  double jumps = 0.0, time = 0.0, jumps_u[2] = {0, 0}, time_u[2] = {0, 0};
  double t_sum = 0.0, term = 0.0, y_sum = 0.0, u_sum = 0.0, u_count = 0.0;
  double d_sum = 0.0, d_sq = 0.0, d_count = 0.0;
  for (const auto& tr : data) {
    const double nj = static_cast<double>(tr.a_path.jumps().size());
    jumps += nj;
    time += tr.t_max;
    if (tr.u) {
      jumps_u[*tr.u] += nj;
      time_u[*tr.u] += tr.t_max;
      u_sum += *tr.u;
      u_count += 1.0;
    }
    t_sum += tr.t_max;
    term += tr.terminated;
    y_sum += tr.y;
    for (const auto& j : tr.a_path.jumps()) {
      d_sum += j.dose;
      d_sq += j.dose * j.dose;
      d_count += 1.0;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double nd = static_cast<double>(m.n);
  m.mean_jumps = jumps / nd;
  m.jump_rate = jumps / time;
  m.jump_rate_u0 = time_u[0] > 0 ? jumps_u[0] / time_u[0] : nan;
  m.jump_rate_u1 = time_u[1] > 0 ? jumps_u[1] / time_u[1] : nan;
  m.mean_t_max = t_sum / nd;
  m.terminated_fraction = term / nd;
  m.mean_y = y_sum / nd;
  m.mean_dose = d_count > 0 ? d_sum / d_count : nan;
  m.sd_dose = d_count > 1 ? std::sqrt(std::max(0.0, (d_sq - d_sum * d_sum / d_count) / (d_count - 1.0))) : nan;
  m.mean_u = u_count > 0 ? u_sum / u_count : nan;
  return m;
}

}  // namespace ctmsm
