#include <doctest.h>

#include <cmath>
#include <random>

#include "errors.hpp"
#include "intensity.hpp"
#include "msm.hpp"
#include "oracles.hpp"
#include "posterior.hpp"

using namespace ctmsm;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274;

Trajectory flat_trajectory(double t_max, int terminated, std::vector<DoseJump> jumps = {}) {
  Trajectory tr;
  tr.id = 1;
  tr.z = {0.0, 0.0};
  tr.t_max = t_max;
  tr.terminated = terminated;
  tr.a_path = TreatmentPath(std::move(jumps), t_max);
  tr.l_path = CovariatePath({0.0}, {0.0});
  return tr;
}

}  // namespace

TEST_CASE("rate evaluations") {
  ObsWorldParams th;
  const std::vector<double> z{0.4, -0.3};
  CHECK(rate_A_obs(th, 1.3, 0.7, z, 1) == doctest::Approx(1.0));
  th.rate.intercept = std::log(2.0);
  CHECK(rate_A_obs(th, 1.3, 0.7, z, 0) == doctest::Approx(2.0));
  th.rate.intercept = 0.0;
  th.rate.confounder = 0.3;
  CHECK(rate_A_obs(th, 0.0, 0.0, z, 1) == doctest::Approx(1.3498588075760032).epsilon(1e-14));

  ExpWorldParams al;
  CHECK(rate_A_exp(al, 2.0) == doctest::Approx(1.0));
  al.rate.intercept = std::log(0.5);
  CHECK(rate_A_exp(al, 2.0) == doctest::Approx(0.5));
  al.rate = {0.0, 0.1};
  CHECK(rate_A_exp(al, 3.0) == doctest::Approx(1.3498588075760032).epsilon(1e-14));

  ObsWorldParams tm;
  CHECK(rate_Tmax_obs(tm, 4.0, 1.0, 1.0, z) == doctest::Approx(1.0));
  tm.termination.time = 0.2;
  CHECK(rate_Tmax_obs(tm, 5.0, 0.0, 0.0, z) == doctest::Approx(2.718281828459045).epsilon(1e-14));
  tm.termination = {-1.0, 0.0, 0.5, {}, 0.0};
  CHECK(rate_Tmax_obs(tm, 3.0, 0.0, 2.0, z) == doctest::Approx(1.0));
}

TEST_CASE("closed-form exponential integral") {
  CHECK(integrate_exp_linear(std::log(2.0), 0.0, 0.0, 3.0) == doctest::Approx(6.0));
  CHECK(integrate_exp_linear(0.3, 0.0, 2.0, 2.0) == 0.0);
  const double exact = (std::exp(0.5 + 0.2 * 4.0) - std::exp(0.5 + 0.2 * 1.0)) / 0.2;
  CHECK(integrate_exp_linear(0.5, 0.2, 1.0, 4.0) == doctest::Approx(exact).epsilon(1e-14));
  // continuity of the b -> 0 limit
  CHECK(integrate_exp_linear(0.5, 1e-14, 1.0, 4.0) == doctest::Approx(3.0 * std::exp(0.5)).epsilon(1e-12));
}

TEST_CASE("cumulative intensities agree with adaptive quadrature") {
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto tr = oracle::random_trajectory(gen);
    const auto th = oracle::random_obs_params(gen);
    const auto al = oracle::random_exp_params(gen);
    const auto h = prepare_subject(tr);
    const auto cuts = oracle::breakpoints(tr);
    const int u = rep % 2;
    const double a_obs = oracle::integrate_piecewise([&](double t) { return oracle::rate_A_obs(th, tr, u, t); }, 0.0,
                                                     tr.t_max, cuts);
    const double t_obs = oracle::integrate_piecewise([&](double t) { return oracle::rate_Tmax_obs(th, tr, t); }, 0.0,
                                                     tr.t_max, cuts);
    const auto& jumps = tr.a_path.jumps();
    const double a_exp = oracle::integrate_piecewise(
        [&](double t) { return std::exp(al.rate.intercept + al.rate.dose * oracle::dose_left(jumps, t)); }, 0.0,
        tr.t_max, cuts);
    const double t_exp = oracle::integrate_piecewise(
        [&](double t) {
          return std::exp(al.termination.intercept + al.termination.time * t +
                          al.termination.dose * oracle::dose_left(jumps, t));
        },
        0.0, tr.t_max, cuts);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    worst = std::max({worst, rel(cumulative_rate_A_obs(h, th, u, tr.t_max), a_obs),
                      rel(cumulative_rate_Tmax_obs(h, th, tr.t_max), t_obs),
                      rel(cumulative_rate_A_exp(h, al, tr.t_max), a_exp),
                      rel(cumulative_rate_Tmax_exp(h, al, tr.t_max), t_exp)});
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("cumulative intensity is additive and zero on an empty interval") {
  std::mt19937_64 gen(5);
  const auto tr = oracle::random_trajectory(gen);
  const auto th = oracle::random_obs_params(gen);
  const auto h = prepare_subject(tr);
  const double t1 = 0.37 * tr.t_max;
  const double whole = cumulative_rate_Tmax_obs(h, th, tr.t_max);
  auto log_rate = [&](const StateSegment& s) {
    return log_rate_Tmax_obs(th, 0.0, s.dose, s.cov, h.z);
  };
  const double left = cumulative_intensity(h.states, log_rate, th.termination.time, 0.0, t1);
  const double right = cumulative_intensity(h.states, log_rate, th.termination.time, t1, tr.t_max);
  CHECK(std::abs(left + right - whole) <= 1e-12 * whole);
  CHECK(cumulative_rate_A_obs(h, th, 0, 0.0) == 0.0);

  // constant rate 2 over [0, 3]
  auto flat = flat_trajectory(3.0, 0);
  ObsWorldParams c;
  c.rate.intercept = std::log(2.0);
  CHECK(cumulative_rate_A_obs(prepare_subject(flat), c, 0, 3.0) == doctest::Approx(6.0));
}

TEST_CASE("mark densities") {
  ObsWorldParams th;
  th.mark.sigma = 1.0;
  const std::vector<double> z{0.0, 0.0};
  CHECK(log_mark_density_obs(th, 0.0, 0.0, 0.0, z, 0) == doctest::Approx(-kHalfLog2Pi));
  th.mark.intercept = 1.0;
  CHECK(log_mark_density_obs(th, 1.0, 0.0, 0.0, z, 0) == doctest::Approx(-kHalfLog2Pi));
  ExpWorldParams al;
  al.mark = {0.0, 0.0, 2.0};
  CHECK(log_mark_density_exp(al, 3.0, 0.0) ==
        doctest::Approx(-std::log(2.0) - kHalfLog2Pi - 9.0 / 8.0).epsilon(1e-14));
}

TEST_CASE("treatment and termination likelihood compositions") {
  ObsWorldParams th;  // all-zero log rates: rate 1
  th.mark.sigma = 1.0;
  auto none = flat_trajectory(2.0, 1);
  CHECK(log_lik_A(none, th, 0) == doctest::Approx(-2.0));
  auto one = flat_trajectory(2.0, 1, {{1.0, 0.5}});
  th.mark.intercept = 0.5;
  CHECK(log_lik_A(one, th, 0) == doctest::Approx(-kHalfLog2Pi - 2.0));
  CHECK(log_lik_Tmax(none, th) == doctest::Approx(-2.0));
  auto cens = flat_trajectory(4.0, 0);
  th.termination.intercept = std::log(0.5);
  CHECK(log_lik_Tmax(cens, th) == doctest::Approx(-2.0));
}

TEST_CASE("likelihood components match scalar and quadrature oracles") {
  std::mt19937_64 gen(77);
  for (int rep = 0; rep < 40; ++rep) {
    const auto tr = oracle::random_trajectory(gen);
    const auto th = oracle::random_obs_params(gen);
    const auto al = oracle::random_exp_params(gen);
    for (int u = 0; u < 2; ++u) {
      CHECK(log_lik_A(tr, th, u) == doctest::Approx(oracle::log_lik_A_obs(tr, th, u)).epsilon(1e-9));
      const double c = exposure_integral(tr.a_path, tr.t_max, th.outcome.kernel);
      CHECK(log_lik_Y(tr, th, u, c) == doctest::Approx(oracle::log_lik_Y(tr, th, u)).epsilon(1e-9));
    }
    CHECK(log_lik_A(tr, al) == doctest::Approx(oracle::log_lik_A_exp(tr, al)).epsilon(1e-9));
    CHECK(log_lik_Tmax(tr, th) == doctest::Approx(oracle::log_lik_Tmax_obs(tr, th)).epsilon(1e-9));
    CHECK(log_lik_Tmax(tr, al) == doctest::Approx(oracle::log_lik_Tmax_exp(tr, al)).epsilon(1e-9));
    CHECK(log_lik_L(tr, th) == doctest::Approx(oracle::log_lik_L(tr, th)).epsilon(1e-12));
  }
}

TEST_CASE("covariate likelihood simple cases") {
  ObsWorldParams th;
  auto tr = flat_trajectory(1.0, 1);
  tr.l_path = CovariatePath({0.0}, {0.0});
  CHECK(log_lik_L(tr, th) == doctest::Approx(-kHalfLog2Pi));
  th.covariate.lag = 0.5;
  tr.l_path = CovariatePath({0.0, 0.5}, {2.0, 1.0});
  th.covariate.sigma = 1.0;
  // first point at mean 0 contributes -2 - c; second at its conditional mean
  CHECK(log_lik_L(tr, th) == doctest::Approx(-kHalfLog2Pi - 2.0 - kHalfLog2Pi));
  tr.l_path = CovariatePath({0.0, 0.5}, {0.0, 0.0});
  CHECK(log_lik_L(tr, th) == doctest::Approx(-2.0 * kHalfLog2Pi));
}

TEST_CASE("outcome likelihood shifts with u by c_U") {
  ObsWorldParams th;
  th.outcome.confounder = 1.0;
  auto tr = flat_trajectory(2.0, 1);
  tr.y = 0.0;
  CHECK(log_lik_Y(tr, th, 0, 0.0) == doctest::Approx(-kHalfLog2Pi));
  tr.y = 1.0;
  CHECK(log_lik_Y(tr, th, 1, 0.0) == doctest::Approx(-kHalfLog2Pi));
}

TEST_CASE("log prior of u") {
  CHECK(log_prior_U(1, 0.5) == doctest::Approx(std::log(0.5)));
  CHECK(log_prior_U(0, 0.5) == doctest::Approx(std::log(0.5)));
  CHECK(log_prior_U(1, 0.3) == doctest::Approx(std::log(0.3)));
  CHECK_THROWS_AS(log_prior_U(1, 1.0), Error);
  CHECK_THROWS_AS(log_prior_U(2, 0.5), Error);
}

TEST_CASE("world equivalence gives identical treatment likelihoods") {
  std::mt19937_64 gen(8);
  auto th = strip_confounding(oracle::random_obs_params(gen));
  const auto al = matching_experimental(th);
  for (int rep = 0; rep < 20; ++rep) {
    const auto tr = oracle::random_trajectory(gen);
    CHECK(log_lik_A(tr, th, 0) == log_lik_A(tr, al));
    CHECK(log_lik_A(tr, th, 1) == log_lik_A(tr, al));
    CHECK(log_lik_Tmax(tr, th) == log_lik_Tmax(tr, al));
  }
}

TEST_CASE("treatment likelihood is invariant to a spurious breakpoint") {
  std::mt19937_64 gen(9);
  for (int rep = 0; rep < 20; ++rep) {
    const auto tr = oracle::random_trajectory(gen);
    const auto th = oracle::random_obs_params(gen);
    const auto h = prepare_subject(tr);
    const auto h2 = with_breakpoint(h, 0.613 * tr.t_max);
    CHECK(log_lik_A(h2, th, 1) == doctest::Approx(log_lik_A(h, th, 1)).epsilon(1e-13));
    CHECK(log_lik_Tmax(h2, th) == doctest::Approx(log_lik_Tmax(h, th)).epsilon(1e-13));
  }
}
