#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "errors.hpp"
#include "oracles.hpp"
#include "posterior.hpp"
#include "stats.hpp"
#include "weights.hpp"

using namespace ctmsm;

TEST_CASE("weights are one when both worlds share the treatment model") {
  std::mt19937_64 gen(10);
  const auto th = strip_confounding(oracle::random_obs_params(gen));
  const auto al = matching_experimental(th);
  std::vector<Trajectory> data;
  for (int i = 0; i < 25; ++i) data.push_back(oracle::random_trajectory(gen));
  const auto hist = prepare_dataset(data);
  for (auto pol : {UPolicy::Ignore, UPolicy::Observed, UPolicy::Marginalized}) {
    const auto s = stabilized_weights(hist, th, al, pol);
    for (double w : s.weights) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::accumulate(s.pi.begin(), s.pi.end(), 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("hand-computed weight") {
  Trajectory tr;
  tr.z = {0.0};
  tr.t_max = 1.0;
  tr.a_path = TreatmentPath({}, 1.0);
  tr.l_path = CovariatePath({0.0}, {0.0});
  ObsWorldParams th;
  th.rate.intercept = std::log(2.0);
  ExpWorldParams al;
  // numerator exp(-1), denominator exp(-2)
  const auto h = prepare_subject(tr);
  CHECK(log_stabilized_weight(h, th, al, UPolicy::Ignore) == doctest::Approx(1.0));
  CHECK(std::exp(log_stabilized_weight(h, th, al, UPolicy::Ignore)) == doctest::Approx(std::exp(1.0)));
  // confounder raises the denominator rate when u = 1
  th.rate.confounder = std::log(1.5);
  CHECK(log_stabilized_weight(h, th, al, UPolicy::Imputed, 1) == doctest::Approx(2.0));
  CHECK(log_stabilized_weight(h, th, al, UPolicy::Imputed, 0) == doctest::Approx(1.0));
}

TEST_CASE("marginalized weight mixes the two denominators") {
  std::mt19937_64 gen(11);
  const auto tr = oracle::random_trajectory(gen);
  const auto th = oracle::random_obs_params(gen);
  const auto al = oracle::random_exp_params(gen);
  const auto h = prepare_subject(tr);
  const double p1 = conditional_posterior_u(h, th);
  const double den = (1 - p1) * std::exp(oracle::log_lik_A_obs(tr, th, 0)) + p1 * std::exp(oracle::log_lik_A_obs(tr, th, 1));
  const double expected = oracle::log_lik_A_exp(tr, al) + oracle::log_lik_Tmax_exp(tr, al) - std::log(den) -
                          oracle::log_lik_Tmax_obs(tr, th);
  CHECK(log_stabilized_weight(h, th, al, UPolicy::Marginalized) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("weight policy input errors") {
  std::mt19937_64 gen(12);
  auto tr = oracle::random_trajectory(gen);
  tr.u.reset();
  const std::vector<SubjectHistory> hist{prepare_subject(tr)};
  const auto th = oracle::random_obs_params(gen);
  const auto al = oracle::random_exp_params(gen);
  CHECK_THROWS_AS(stabilized_weights(hist, th, al, UPolicy::Observed), Error);
  CHECK_THROWS_AS(stabilized_weights(hist, th, al, UPolicy::Imputed), Error);
  const std::vector<int> u{1};
  CHECK_NOTHROW(stabilized_weights(hist, th, al, UPolicy::Imputed, u));
}

TEST_CASE("percentiles and truncation") {
  CHECK(percentile({1, 2, 3, 4}, 50.0) == doctest::Approx(2.5));
  CHECK(percentile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(percentile({4, 1, 3, 2}, 100.0) == 4.0);
  std::vector<double> w(20);
  std::iota(w.begin(), w.end(), 1.0);
  CHECK(percentile(w, 95.0) == doctest::Approx(19.05));
  WeightedSample s;
  s.weights = w;
  s.pi.assign(20, 0.05);
  const auto t = truncate_weights(s, 95.0);
  CHECK(t.weights[19] == doctest::Approx(19.05));
  CHECK(t.weights[18] == 19.0);
  CHECK(truncate_weights(s, 100.0).weights == w);
  CHECK_THROWS_AS(truncate_weights(s, 0.0), Error);
  CHECK_THROWS_AS(truncate_weights(s, 101.0), Error);
  CHECK_THROWS_AS(truncate_weights(WeightedSample{}, 95.0), Error);

  // {1, 2, 2, 2}
  const std::vector<double> v{1.0, 2.0}, m{1.0, 3.0};
  CHECK(percentile_weighted(v, m, 25.0) == doctest::Approx(1.75));
  CHECK(percentile_weighted(v, m, 10.0) == doctest::Approx(1.3));
  const auto capped = truncate_weights(std::vector<double>{1.0, 5.0, 2.0}, std::vector<double>{2.0, 1.0, 0.0}, 50.0);
  CHECK(capped == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("truncation matches a percentile over the expanded sample") {
  std::mt19937_64 gen(13);
  std::lognormal_distribution<double> lw(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, 3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> w(30), mult(30), expanded;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = lw(gen);
      mult[i] = count(gen);
      for (int k = 0; k < mult[i]; ++k) expanded.push_back(w[i]);
    }
    if (expanded.empty()) continue;
    CHECK(percentile_weighted(w, mult, 95.0) == doctest::Approx(percentile(expanded, 95.0)).epsilon(1e-14));
  }
}

TEST_CASE("bootstrap draws") {
  RngStream rng(1, 2);
  const auto c = draw_multinomial_counts(1000, rng);
  CHECK(std::accumulate(c.begin(), c.end(), 0) == 1000);
  int zeros = 0;
  for (int x : c) zeros += x == 0;
  // P(count = 0) -> exp(-1)
  CHECK(std::abs(zeros / 1000.0 - std::exp(-1.0)) < 4.0 * std::sqrt(0.2325 / 1000.0));
  const auto pi = draw_bayesian_bootstrap(50, rng);
  CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  for (double p : pi) CHECK(p >= 0.0);
  RngStream a(9, 9), b(9, 9);
  CHECK(draw_multinomial_counts(40, a) == draw_multinomial_counts(40, b));
}

TEST_CASE("replication metrics") {
  const std::vector<double> pts{1.0, 3.0}, sds{0.5, 1.5};
  const std::vector<Interval> iv{{0.0, 2.0}, {2.0, 4.0}};
  const auto m = compute_metrics(pts, sds, iv, 1.5);
  CHECK(m.bias == doctest::Approx(0.5));
  CHECK(m.sd == doctest::Approx(std::sqrt(2.0)));
  CHECK(m.se == doctest::Approx(1.0));
  CHECK(m.cp95 == doctest::Approx(50.0));
  CHECK(m.lci == doctest::Approx(2.0));
  CHECK(m.count == 2);
  CHECK(m.sd_defined);
  const auto one = compute_metrics(std::vector<double>{2.0}, std::vector<double>{0.1},
                                   std::vector<Interval>{{1.0, 3.0}}, 2.0);
  CHECK_FALSE(one.sd_defined);
  CHECK(one.cp95 == 100.0);
  CHECK_THROWS_AS(compute_metrics({}, {}, {}, 0.0), Error);
  CHECK(sample_sd(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("distribution helpers") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(chi_square_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi_square_sf(3.0, 2.0) == doctest::Approx(std::exp(-1.5)).epsilon(1e-13));
  CHECK(chi_square_sf(0.0, 5.0) == 1.0);
  CHECK(ks_distance({0.5}, [](double x) { return x; }) == doctest::Approx(0.5));
  CHECK(ks_distance({0.1, 0.6}, [](double x) { return x; }) == doctest::Approx(0.4));
}
