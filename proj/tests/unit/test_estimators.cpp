#include <doctest.h>

#include <cmath>

#include "config.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "simulator.hpp"

using namespace ctmsm;

namespace {

EstimatorConfig small_config() {
  EstimatorConfig c;
  c.replicate_count = 10;
  c.seed = 4;
  c.bct.sampler.n_burnin = 300;
  c.bct.sampler.n_thin = 2;
  c.bct.em_iterations = 5;
  return c;
}

std::vector<Trajectory> observational(int n, double delta, std::uint64_t seed) {
  auto cfg = default_scenario();
  cfg.obs_params = with_confounding(cfg.obs_params, delta);
  return simulate_dataset(cfg, World::Observational, n, seed);
}

}  // namespace

TEST_CASE("estimator names") {
  for (auto k : kAllEstimators) CHECK(parse_estimator(to_string(k)) == k);
  CHECK_FALSE(parse_estimator("nope").has_value());
  CHECK(std::string(to_string(EstimatorKind::Naive)) == "Naive");
}

TEST_CASE("naive estimator is the unit-weight fit with bootstrap uncertainty") {
  const auto data = observational(300, 0.3, 8);
  const auto cfg = small_config();
  const auto r = run_estimator(EstimatorKind::Naive, data, cfg);
  const MsmData msm{std::span<const Trajectory>(data)};
  const auto direct = fit_msm(msm, std::vector<double>(data.size(), 1.0));
  REQUIRE(r.full_data_fit.has_value());
  CHECK(r.full_data_fit->eta2 == doctest::Approx(direct.params.eta2).epsilon(1e-12));
  CHECK(r.full_data_fit->eta3 == doctest::Approx(direct.params.eta3).epsilon(1e-12));
  // the reported point is the replicate mean
  double m = 0.0;
  for (const auto& p : r.replicate_points) m += p.eta2;
  CHECK(r.point.eta2 == doctest::Approx(m / static_cast<double>(r.replicate_points.size())).epsilon(1e-14));
  CHECK(r.replicate_points.size() + static_cast<std::size_t>(r.failures) == 10);
  for (int k = 0; k < 4; ++k) {
    CHECK(r.sd[k] > 0.0);
    CHECK(r.interval_95[k].lo < r.interval_95[k].hi);
  }
  CHECK(r.max_weight == 1.0);
}

TEST_CASE("estimators are deterministic and grouped runs equal separate runs") {
  const auto data = observational(300, 0.3, 9);
  const auto cfg = small_config();
  const std::vector<EstimatorKind> kinds{EstimatorKind::IgnoreU, EstimatorKind::IgnoreUTrunc95,
                                         EstimatorKind::ObservedU};
  const auto grouped = run_estimators(kinds, data, cfg);
  for (auto k : kinds) {
    const auto single = run_estimator(k, data, cfg);
    const auto& g = grouped.at(k);
    CHECK(single.point.eta2 == g.point.eta2);
    CHECK(single.sd[1] == g.sd[1]);
    CHECK(single.interval_95[2].lo == g.interval_95[2].lo);
  }
  // truncation caps the largest weight
  CHECK(grouped.at(EstimatorKind::IgnoreUTrunc95).max_weight <= grouped.at(EstimatorKind::IgnoreU).max_weight);
}

TEST_CASE("BCT estimator produces one fit per retained draw") {
  const auto data = observational(250, 0.3, 10);
  auto cfg = small_config();
  const auto r = run_estimator(EstimatorKind::Bct, data, cfg);
  CHECK(r.replicate_points.size() == 10);
  CHECK(std::isfinite(r.point.eta2));
  CHECK(r.sd[1] > 0.0);
  CHECK_FALSE(r.diagnostics.blocks.empty());
  const auto again = run_estimator(EstimatorKind::Bct, data, cfg);
  CHECK(again.point.eta2 == r.point.eta2);
}

TEST_CASE("estimator configuration is checked") {
  auto c = small_config();
  c.replicate_count = 1;
  CHECK_THROWS_AS(validate(c), Error);
  c = small_config();
  c.trunc_percentile = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = small_config();
  c.max_failure_fraction = 1.5;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("observed-u estimator needs u") {
  auto data = observational(60, 0.0, 11);
  data[0].u.reset();
  auto c = small_config();
  CHECK_THROWS_AS(run_estimator(EstimatorKind::ObservedU, data, c), Error);
}

TEST_CASE("experimental-world MSM parameters are reproducible") {
  const auto cfg = default_scenario();
  const auto a = true_eta(cfg.exp_params, cfg, 2000, 3);
  const auto b = true_eta(cfg.exp_params, cfg, 2000, 3, 2);
  CHECK(a.eta2 == b.eta2);
  CHECK(a.eta3 == b.eta3);
  CHECK(a.eta2 == doctest::Approx(cfg.obs_params.outcome.dose).epsilon(0.1));
}
