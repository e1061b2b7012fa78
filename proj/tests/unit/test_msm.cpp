#include <doctest.h>

#include <cmath>
#include <random>

#include "errors.hpp"
#include "msm.hpp"
#include "oracles.hpp"

using namespace ctmsm;

namespace {

std::vector<Trajectory> synthetic_msm_data(int n, const MsmParams& truth, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> eps(0.0, truth.sigma);
  std::vector<Trajectory> out;
  for (int i = 0; i < n; ++i) {
    auto tr = oracle::random_trajectory(gen);
    const double c = exposure_integral(tr.a_path, tr.t_max, truth.eta3);
    tr.y = truth.eta1 + truth.eta2 * c + eps(gen);
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace

TEST_CASE("exposure integral worked values") {
  const TreatmentPath path({{4.0, 3.0}}, 12.0);
  const double c = exposure_integral(path, 12.0, 4.051);
  CHECK(c >= 8.28);
  CHECK(c <= 8.30);
  CHECK(c == doctest::Approx(3.0 * 12.0 / 4.051 * (1.0 - std::exp(-4.051 * 8.0 / 12.0))).epsilon(1e-13));
  CHECK(exposure_integral(path, 12.0, 0.0) == doctest::Approx(24.0));
  const TreatmentPath flat({{0.0, 3.0}}, 12.0);
  CHECK(exposure_integral(flat, 12.0, 0.0) == doctest::Approx(36.0));
  // continuity at the eta3 -> 0 limit
  CHECK(exposure_integral(flat, 12.0, 1e-8) == doctest::Approx(36.0).epsilon(1e-7));
  CHECK(exposure_integral(TreatmentPath({}, 5.0), 5.0, 1.0) == 0.0);
  CHECK_THROWS_AS(exposure_integral(flat, 12.0, -1.0), Error);
}

TEST_CASE("exposure integral agrees with quadrature and is monotone in eta3") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto tr = oracle::random_trajectory(gen);
    double prev = INFINITY;
    for (double eta3 : {0.0, 0.3, 1.0, 2.5, 7.0, 30.0}) {
      const double c = exposure_integral(tr.a_path, tr.t_max, eta3);
      CHECK(c == doctest::Approx(oracle::exposure(tr, eta3)).epsilon(1e-9));
      if (!tr.a_path.jumps().empty()) CHECK(c <= prev);
      prev = c;
    }
  }
}

TEST_CASE("cached exposure and derivative match direct evaluation and differences") {
  std::mt19937_64 gen(12);
  std::vector<Trajectory> data;
  for (int i = 0; i < 30; ++i) data.push_back(oracle::random_trajectory(gen));
  const MsmData msm{std::span<const Trajectory>(data)};
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double eta3 : {0.0, 0.7, 4.0}) {
      const auto [c, dc] = msm.exposure_with_derivative(i, eta3);
      CHECK(c == doctest::Approx(exposure_integral(data[i].a_path, data[i].t_max, eta3)).epsilon(1e-12));
      const double h = 1e-6;
      const double lo = exposure_integral(data[i].a_path, data[i].t_max, std::max(0.0, eta3 - h));
      const double hi = exposure_integral(data[i].a_path, data[i].t_max, eta3 + h);
      const double fd = (hi - lo) / (eta3 + h - std::max(0.0, eta3 - h));
      CHECK(dc == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
    }
  }
}

TEST_CASE("MSM density is a normal density in y") {
  const TreatmentPath path({{0.0, 1.0}}, 2.0);
  const MsmParams p{1.0, 0.5, 0.0, 2.0};
  // mean 1 + 0.5 * 2 = 2
  CHECK(msm_log_density(2.0, 2.0, path, p) == doctest::Approx(-std::log(2.0) - kHalfLogTwoPi));
  CHECK(msm_log_density(4.0, 2.0, path, p) == doctest::Approx(-std::log(2.0) - kHalfLogTwoPi - 0.5));
}

TEST_CASE("pseudo-likelihood gradient matches finite differences") {
  const auto data = synthetic_msm_data(200, {1.0, 2.0, 2.0, 1.0}, 3);
  const MsmData msm{std::span<const Trajectory>(data)};
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> w(0.2, 3.0);
  std::vector<double> weights(data.size());
  for (auto& x : weights) x = w(gen);
  const MsmParams p{0.8, 1.7, 1.4, 1.3};
  const auto g = weighted_pseudo_loglik_gradient(msm, weights, p);
  const auto fd = oracle::fd_gradient(
      [&](const std::vector<double>& x) {
        return weighted_pseudo_loglik(msm, weights, {x[0], x[1], x[2], std::exp(x[3])});
      },
      {p.eta1, p.eta2, p.eta3, std::log(p.sigma)});
  for (int k = 0; k < 4; ++k) CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-6).scale(1.0));
  CHECK(profile_objective_grad_check(msm, weights, p) < 1e-4);
}

TEST_CASE("weighted fit recovers generating parameters") {
  const MsmParams truth{1.0, 2.0, 2.0, 1.0};
  const auto data = synthetic_msm_data(5000, truth, 21);
  const MsmData msm{std::span<const Trajectory>(data)};
  const std::vector<double> ones(data.size(), 1.0);
  const auto fit = fit_msm(msm, ones);
  CHECK(fit.converged);
  CHECK(fit.params.eta1 == doctest::Approx(truth.eta1).epsilon(0.1));
  CHECK(fit.params.eta2 == doctest::Approx(truth.eta2).epsilon(0.03));
  CHECK(fit.params.eta3 == doctest::Approx(truth.eta3).epsilon(0.1));
  CHECK(fit.params.sigma == doctest::Approx(truth.sigma).epsilon(0.05));

  // stationarity at the optimum
  const auto g = weighted_pseudo_loglik_gradient(msm, ones, fit.params);
  for (double x : g) CHECK(std::abs(x) < 1e-3);
  // no grid point does better
  for (double eta3 = 0.0; eta3 <= 10.0; eta3 += 0.5) {
    std::vector<double> y(data.size()), c(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      y[i] = data[i].y;
      c[i] = msm.exposure(i, eta3);
    }
    // ordinary least squares at fixed eta3
    double sc = 0, sy = 0, scc = 0, scy = 0;
    const double n = static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      sc += c[i];
      sy += y[i];
      scc += c[i] * c[i];
      scy += c[i] * y[i];
    }
    const double b = (scy - sc * sy / n) / (scc - sc * sc / n);
    const double a = (sy - b * sc) / n;
    double rss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) rss += std::pow(y[i] - a - b * c[i], 2);
    const double ll = weighted_pseudo_loglik(msm, ones, {a, b, eta3, std::sqrt(rss / n)});
    CHECK(ll <= fit.objective + 1e-8);
  }
}

TEST_CASE("fit is invariant to weight scaling and to duplicating with halved weights") {
  const auto data = synthetic_msm_data(300, {0.5, 1.5, 3.0, 0.8}, 8);
  const MsmData msm{std::span<const Trajectory>(data)};
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> w(0.1, 4.0);
  std::vector<double> weights(data.size());
  for (auto& x : weights) x = w(gen);
  const auto base = fit_msm(msm, weights);

  std::vector<double> scaled = weights;
  for (auto& x : scaled) x *= 7.5;
  const auto s = fit_msm(msm, scaled);

  std::vector<Trajectory> doubled = data;
  doubled.insert(doubled.end(), data.begin(), data.end());
  std::vector<double> halved;
  for (int k = 0; k < 2; ++k)
    for (double x : weights) halved.push_back(x / 2.0);
  const MsmData msm2{std::span<const Trajectory>(doubled)};
  const auto d = fit_msm(msm2, halved);

  for (const auto* f : {&s, &d}) {
    CHECK(f->params.eta1 == doctest::Approx(base.params.eta1).epsilon(1e-5));
    CHECK(f->params.eta2 == doctest::Approx(base.params.eta2).epsilon(1e-5));
    CHECK(f->params.eta3 == doctest::Approx(base.params.eta3).epsilon(1e-4));
    CHECK(f->params.sigma == doctest::Approx(base.params.sigma).epsilon(1e-5));
  }
}

TEST_CASE("degenerate and invalid weighted fits are rejected") {
  std::vector<Trajectory> data;
  for (int i = 0; i < 10; ++i) {
    Trajectory tr;
    tr.id = i;
    tr.t_max = 5.0;
    tr.a_path = TreatmentPath({}, 5.0);
    tr.y = 0.1 * i;
    data.push_back(tr);
  }
  const MsmData msm{std::span<const Trajectory>(data)};
  std::vector<double> ones(data.size(), 1.0);
  CHECK_THROWS_AS(fit_msm(msm, ones), Error);
  try {
    fit_msm(msm, ones);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateFit);
  }
  std::vector<double> bad = ones;
  bad[3] = -1.0;
  CHECK_THROWS_AS(weighted_pseudo_loglik(msm, bad, {}), Error);
  CHECK_THROWS_AS(weighted_pseudo_loglik(msm, std::vector<double>(3, 1.0), {}), Error);
  std::vector<double> sparse(data.size(), 0.0);
  sparse[0] = sparse[1] = 1.0;
  CHECK_THROWS_AS(fit_msm(msm, sparse), Error);
}
