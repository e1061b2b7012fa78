#include <doctest.h>

#include <cmath>
#include <random>

#include "errors.hpp"
#include "oracles.hpp"
#include "posterior.hpp"

using namespace ctmsm;

namespace {

double log_odds_u(const Trajectory& tr, const ObsWorldParams& th) {
  double g[2];
  for (int u = 0; u < 2; ++u)
    g[u] = oracle::log_lik_Y(tr, th, u) + oracle::log_lik_A_obs(tr, th, u) +
           (u ? std::log(th.confounder_prob) : std::log1p(-th.confounder_prob));
  return g[1] - g[0];
}

}  // namespace

TEST_CASE("marginal likelihood equals enumeration over all confounder vectors") {
  std::mt19937_64 gen(314);
  for (int rep = 0; rep < 15; ++rep) {
    std::vector<Trajectory> data;
    for (int i = 0; i < 3; ++i) {
      auto tr = oracle::random_trajectory(gen);
      tr.id = i + 1;
      data.push_back(std::move(tr));
    }
    const auto th = oracle::random_obs_params(gen);
    const auto hist = prepare_dataset(data);
    CHECK(marginal_loglik_obs(hist, th) ==
          doctest::Approx(oracle::marginal_loglik_enumerated(data, th)).epsilon(1e-9));
  }
}

TEST_CASE("marginal likelihood ignores stored u") {
  std::mt19937_64 gen(2);
  std::vector<Trajectory> data{oracle::random_trajectory(gen), oracle::random_trajectory(gen)};
  const auto th = oracle::random_obs_params(gen);
  const double a = marginal_loglik_obs(prepare_dataset(data), th);
  data[0].u = 1 - data[0].u.value_or(0);
  data[1].u.reset();
  CHECK(marginal_loglik_obs(prepare_dataset(data), th) == a);
}

TEST_CASE("conditional probability of u") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 30; ++rep) {
    const auto tr = oracle::random_trajectory(gen);
    const auto th = oracle::random_obs_params(gen);
    const double expected = 1.0 / (1.0 + std::exp(-log_odds_u(tr, th)));
    CHECK(conditional_posterior_u(tr, th) == doctest::Approx(expected).epsilon(1e-10));
  }
  // without confounding the record says nothing about u
  auto tr = oracle::random_trajectory(gen);
  ObsWorldParams th;
  th.confounder_prob = 0.3;
  CHECK(conditional_posterior_u(tr, th) == doctest::Approx(0.3).epsilon(1e-14));
  // outcome-only confounding: y = 1 with c_U = 1, sigma 1, mean 0 or 1
  tr.a_path = TreatmentPath({}, tr.t_max);
  tr.y = 1.0;
  th.confounder_prob = 0.5;
  th.outcome.confounder = 1.0;
  CHECK(conditional_posterior_u(tr, th) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-12));
}

TEST_CASE("log-sum-exp") {
  CHECK(log_sum_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(log_sum_exp(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(-1000.0, -1001.0) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
  CHECK(log_sum_exp(-INFINITY, 2.0) == 2.0);
}

TEST_CASE("parameter layouts round-trip") {
  std::mt19937_64 gen(4);
  const auto th = oracle::random_obs_params(gen);
  const ThetaLayout lay(2);
  CHECK(lay.size() == 34);
  const auto x = lay.pack(th);
  const auto back = lay.unpack(x);
  CHECK((lay.pack(back) - x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(back.confounder_prob == doctest::Approx(th.confounder_prob).epsilon(1e-14));
  CHECK(back.mark.sigma == doctest::Approx(th.mark.sigma).epsilon(1e-14));
  CHECK(x[lay.index("logit_theta_U")] == doctest::Approx(std::log(th.confounder_prob / (1 - th.confounder_prob))));
  CHECK(x[lay.index("log_sigma_Y")] == doctest::Approx(std::log(th.outcome.sigma)));
  CHECK(lay.index("nope") == -1);
  std::size_t covered = 0;
  for (auto b : {ThetaBlock::A1, ThetaBlock::A2, ThetaBlock::Y, ThetaBlock::U, ThetaBlock::Tmax, ThetaBlock::L})
    covered += lay.block(b).size();
  CHECK(covered == lay.size());

  const AlphaLayout al;
  const auto a = oracle::random_exp_params(gen);
  const auto ax = al.pack(a);
  CHECK((al.pack(al.unpack(ax)) - ax).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("priors on the sampling coordinates") {
  const ThetaLayout lay(1);
  ObsWorldParams th;
  th.confounder_prob = 0.25;
  th.outcome.kernel = 1.0;
  Eigen::VectorXd x = lay.pack(th);
  Priors flat;
  // Uniform(0, 1) on theta_U becomes p (1 - p) on the logit scale
  CHECK(log_prior_theta(lay, x, flat) == doctest::Approx(std::log(0.25 * 0.75)));
  Priors normal;
  normal.normal["c_0"] = {1.0, 2.0};
  x[lay.index("c_0")] = 3.0;
  CHECK(log_prior_theta(lay, x, normal) - log_prior_theta(lay, x, flat) == doctest::Approx(-0.5 - std::log(2.0)));
  x[lay.index("c_kernel")] = -0.1;
  CHECK(log_prior_theta(lay, x, flat) == -INFINITY);
  x[lay.index("c_kernel")] = 0.0;
  CHECK(std::isfinite(log_prior_theta(lay, x, flat)));
  x[0] = NAN;
  CHECK(log_prior_theta(lay, x, flat) == -INFINITY);
}

TEST_CASE("posterior is minus infinity outside the support") {
  std::mt19937_64 gen(5);
  const std::vector<Trajectory> data{oracle::random_trajectory(gen)};
  const auto hist = prepare_dataset(data);
  auto th = oracle::random_obs_params(gen);
  CHECK(std::isfinite(log_posterior_obs(hist, th, {})));
  auto bad = th;
  bad.confounder_prob = 1.0;
  CHECK(log_posterior_obs(hist, bad, {}) == -INFINITY);
  bad = th;
  bad.mark.sigma = 0.0;
  CHECK(log_posterior_obs(hist, bad, {}) == -INFINITY);
  bad = th;
  bad.outcome.kernel = -1.0;
  CHECK(log_posterior_obs(hist, bad, {}) == -INFINITY);
  // posterior = likelihood + prior
  const ThetaLayout lay(2);
  CHECK(log_posterior_obs(hist, th, {}) ==
        doctest::Approx(marginal_loglik_obs(hist, th) + log_prior_theta(lay, lay.pack(th), {})));
}

TEST_CASE("experimental log-likelihood sums the subject terms") {
  std::mt19937_64 gen(6);
  std::vector<Trajectory> data{oracle::random_trajectory(gen), oracle::random_trajectory(gen)};
  const auto al = oracle::random_exp_params(gen);
  double expected = 0.0;
  for (const auto& tr : data) expected += oracle::log_lik_A_exp(tr, al) + oracle::log_lik_Tmax_exp(tr, al);
  CHECK(exp_loglik(prepare_dataset(data), al) == doctest::Approx(expected).epsilon(1e-9));
}
