#include <doctest.h>

#include <cmath>
#include <random>

#include "config.hpp"
#include "errors.hpp"
#include "mle.hpp"
#include "oracles.hpp"
#include "simulator.hpp"

using namespace ctmsm;

namespace {

// Piecewise design of one subject with a single covariate column plus intercept.
ProcessDesign small_design(bool slope) {
  ProcessDesign d;
  d.x.resize(4, 2);
  d.x << 1, 0.0, 1, 1.0, 1, 2.0, 1, 0.5;
  d.t1.resize(4);
  d.t2.resize(4);
  d.w.resize(4);
  d.t1 << 0.0, 1.0, 2.5, 4.0;
  d.t2 << 1.0, 2.5, 4.0, 6.0;
  d.w << 1.0, 2.0, 1.0, 0.5;
  d.event_sum.resize(2);
  d.event_sum << 4.0, 3.5;
  d.event_count = 4.0;
  d.event_time_sum = 9.0;
  d.exposure_time = 6.0;
  d.has_slope = slope;
  return d;
}

}  // namespace

TEST_CASE("Brent maximization of a smooth function") {
  const auto r = brent_maximize([](double x) { return -(x - 1.3) * (x - 1.3) + std::cos(x - 1.3); }, 0.0, 4.0, 1e-10);
  CHECK(r.converged);
  CHECK(r.x == doctest::Approx(1.3).epsilon(1e-7));
  // maximum at a boundary
  const auto b = brent_maximize([](double x) { return -x; }, 0.5, 3.0, 1e-10);
  CHECK(b.x == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("Newton ascent on a non-quadratic concave function") {
  const ValueAndGradient f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    const double e = std::exp(x[0] + 0.5 * x[1]);
    g[0] = 3.0 - e - 0.2 * x[0];
    g[1] = 1.0 - 0.5 * e - 2.0 * x[1];
    return 3.0 * x[0] + x[1] - e - 0.1 * x[0] * x[0] - x[1] * x[1];
  };
  const auto r = maximize_quasi_newton(f, Eigen::VectorXd::Zero(2));
  CHECK(r.converged);
  CHECK(r.gradient.cwiseAbs().maxCoeff() < 1e-6);
  // check against a brute-force profile along x[1]
  Eigen::VectorXd g(2);
  const double best = f(r.x, g);
  for (double a = -1.0; a <= 3.0; a += 0.05)
    for (double b = -1.0; b <= 1.0; b += 0.05) {
      Eigen::VectorXd p(2);
      p << a, b;
      CHECK(f(p, g) <= best + 1e-12);
    }
}

TEST_CASE("Hessian helpers agree on a quadratic") {
  Eigen::Matrix2d a;
  a << -2.0, 0.5, 0.5, -1.0;
  const ValueAndGradient f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = a * x;
    return 0.5 * x.dot(a * x);
  };
  const Eigen::VectorXd x = Eigen::Vector2d(0.3, -0.7);
  const auto h1 = hessian_from_gradient(f, x);
  const auto h2 = hessian_from_values(
      [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd g;
        return f(y, g);
      },
      x, Eigen::Vector2d(1e-4, 1e-4));
  CHECK((h1 - a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((h2 - a).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("process log-likelihood value and gradient") {
  for (bool slope : {false, true}) {
    const auto d = small_design(slope);
    Eigen::VectorXd p(slope ? 3 : 2);
    if (slope)
      p << -0.4, 0.3, 0.05;
    else
      p << -0.4, 0.3;
    // direct evaluation: events minus integrated rate
    double expected = p[0] * d.event_sum[0] + p[1] * d.event_sum[1] + (slope ? p[2] * d.event_time_sum : 0.0);
    for (int r = 0; r < 4; ++r) {
      const double lin = d.x.row(r).dot(p.head(2));
      const double b = slope ? p[2] : 0.0;
      expected -= d.w[r] * oracle::integrate([&](double t) { return std::exp(lin + b * t); }, d.t1[r], d.t2[r]);
    }
    Eigen::VectorXd g;
    CHECK(process_loglik(d, p, &g) == doctest::Approx(expected).epsilon(1e-12));
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& v) {
          return process_loglik(d, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
                                nullptr);
        },
        std::vector<double>(p.data(), p.data() + p.size()));
    for (Eigen::Index k = 0; k < p.size(); ++k) CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-7));
  }
}

TEST_CASE("constant-rate process has the events-over-exposure estimate") {
  ProcessDesign d;
  d.x = Eigen::MatrixXd::Ones(3, 1);
  d.t1 = Eigen::Vector3d(0.0, 0.0, 0.0);
  d.t2 = Eigen::Vector3d(2.0, 5.0, 3.5);
  d.w = Eigen::Vector3d(1.0, 1.0, 2.0);
  d.event_sum = Eigen::VectorXd::Constant(1, 7.0);
  d.event_count = 7.0;
  d.exposure_time = 14.0;
  const auto fit = fit_process(d);
  CHECK(fit.converged);
  CHECK(fit.params[0] == doctest::Approx(std::log(7.0 / 14.0)).epsilon(1e-9));
  CHECK(fit.loglik == doctest::Approx(7.0 * std::log(0.5) - 7.0).epsilon(1e-10));
}

TEST_CASE("experimental-world fit recovers the generating parameters") {
  const auto cfg = default_scenario();
  const auto data = simulate_dataset(cfg, World::Experimental, 3000, 44);
  const auto hist = prepare_dataset(data);
  const auto r = fit_mle(hist, MleModel::ExpMarginal);
  const auto& a = cfg.exp_params;
  CHECK(r.converged);
  CHECK(r.alpha.rate.intercept == doctest::Approx(a.rate.intercept).epsilon(0.08));
  CHECK(std::abs(r.alpha.rate.dose - a.rate.dose) < 0.05);
  CHECK(r.alpha.mark.intercept == doctest::Approx(a.mark.intercept).epsilon(0.05));
  CHECK(r.alpha.mark.dose == doctest::Approx(a.mark.dose).epsilon(0.05));
  CHECK(r.alpha.mark.sigma == doctest::Approx(a.mark.sigma).epsilon(0.05));
  CHECK(r.alpha.termination.intercept == doctest::Approx(a.termination.intercept).epsilon(0.05));
  CHECK(r.alpha.termination.time == doctest::Approx(a.termination.time).epsilon(0.15));
  CHECK(r.alpha.termination.dose == doctest::Approx(a.termination.dose).epsilon(0.25));
}

TEST_CASE("observed-u fit sees the confounder; fractional u reproduces it") {
  auto cfg = default_scenario();
  cfg.obs_params = with_confounding(cfg.obs_params, 0.3);
  const auto data = simulate_dataset(cfg, World::Observational, 2000, 45);
  const auto hist = prepare_dataset(data);
  const auto r = fit_mle(hist, MleModel::ObsObservedU);
  CHECK(std::abs(r.theta.rate.confounder - 0.3) < 0.1);
  CHECK(std::abs(r.theta.mark.confounder - 0.3) < 0.1);
  CHECK(std::abs(r.theta.outcome.confounder - cfg.obs_params.outcome.confounder) < 0.3);
  CHECK(std::abs(r.theta.confounder_prob - cfg.obs_params.confounder_prob) < 0.05);

  std::vector<double> q;
  for (const auto& h : hist) q.push_back(*h.u);
  const auto f = fit_obs_fractional_u(hist, q, {});
  CHECK(f.rate.confounder == doctest::Approx(r.theta.rate.confounder).epsilon(1e-6));
  CHECK(f.mark.intercept == doctest::Approx(r.theta.mark.intercept).epsilon(1e-9));

  const auto ig = fit_mle(hist, MleModel::ObsIgnoreU);
  CHECK(ig.theta.rate.confounder == 0.0);
  CHECK(ig.theta.mark.confounder == 0.0);

  // frequency weights of 2 equal a duplicated dataset
  std::vector<double> twos(hist.size(), 2.0);
  const auto w = fit_mle(hist, MleModel::ExpMarginal, twos);
  std::vector<SubjectHistory> doubled = hist;
  doubled.insert(doubled.end(), hist.begin(), hist.end());
  const auto d = fit_mle(doubled, MleModel::ExpMarginal);
  CHECK(w.alpha.rate.intercept == doctest::Approx(d.alpha.rate.intercept).epsilon(1e-7));
  CHECK(w.alpha.termination.time == doctest::Approx(d.alpha.termination.time).epsilon(1e-6));
}

TEST_CASE("observed-u fit without u is an input error") {
  const auto cfg = default_scenario();
  auto data = simulate_dataset(cfg, World::Observational, 50, 46);
  data[7].u.reset();
  const auto hist = prepare_dataset(data);
  try {
    fit_mle(hist, MleModel::ObsObservedU);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
  CHECK_THROWS_AS(fit_mle(std::span<const SubjectHistory>{}, MleModel::ExpMarginal), Error);
}
