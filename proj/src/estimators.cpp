#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "errors.hpp"
#include "intensity.hpp"
#include "mle.hpp"
#include "parallel.hpp"
#include "posterior.hpp"
#include "simulator.hpp"

namespace ctmsm {

namespace {

// Stream families; estimators sharing resamples share a family.
constexpr std::uint64_t kFamilyNaive = 1;
constexpr std::uint64_t kFamilyIgnoreU = 2;
constexpr std::uint64_t kFamilyObservedU = 3;
constexpr std::uint64_t kFamilyBct = 4;

struct Replicate {
  bool ok = false;
  MsmParams params;
  double max_weight = 0.0;
  std::string error;
};

std::vector<double> to_double(const std::vector<int>& counts) { return {counts.begin(), counts.end()}; }

double max_of(std::span<const double> v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

EstimateWithUncertainty summarize(EstimatorKind kind, const std::vector<Replicate>& reps, const EstimatorConfig& cfg) {
  EstimateWithUncertainty est;
  est.kind = kind;
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const auto& r = reps[k];
    if (r.ok) {
      est.replicate_points.push_back(r.params);
      est.max_replicate_weight = std::max(est.max_replicate_weight, r.max_weight);
    } else {
      ++est.failures;
      est.failure_messages.push_back("replicate " + std::to_string(k) + ": " + r.error);
    }
  }
  const double limit = cfg.max_failure_fraction * static_cast<double>(reps.size());
  if (static_cast<double>(est.failures) > limit || est.replicate_points.empty()) {
    std::ostringstream os;
    os << to_string(kind) << ": " << est.failures << " of " << reps.size() << " replicates failed";
    if (!est.failure_messages.empty()) os << " (first: " << est.failure_messages.front() << ")";
    fail(ErrorKind::Estimator, os.str());
  }
  for (std::size_t p = 0; p < 4; ++p) {
    std::vector<double> v;
    v.reserve(est.replicate_points.size());
    for (const auto& r : est.replicate_points) v.push_back(as_array(r)[p]);
    est.sd[p] = sample_sd(v);
    est.interval_95[p] = {percentile(v, 2.5), percentile(v, 97.5)};
    const double m = mean(v);
    switch (p) {
      case 0: est.point.eta1 = m; break;
      case 1: est.point.eta2 = m; break;
      case 2: est.point.eta3 = m; break;
      default: est.point.sigma = m; break;
    }
  }
  return est;
}

template <class Fn>
std::vector<Replicate> run_replicates(int count, int threads, Fn&& fn) {
  std::vector<Replicate> reps(static_cast<std::size_t>(count));
  parallel_for(reps.size(), threads, [&](std::size_t k) {
    try {
      reps[k] = fn(k);
      reps[k].ok = true;
    } catch (const Error& e) {
      reps[k].ok = false;
      reps[k].error = e.what();
    }
  });
  return reps;
}

MleOptions treatment_only(MleOptions o) {
  o.fit_covariate = false;
  o.fit_outcome = false;
  return o;
}

std::vector<double> product(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

struct Context {
  std::span<const Trajectory> data;
  std::vector<SubjectHistory> hist;
  MsmData msm;
  const EstimatorConfig& cfg;
  Context(std::span<const Trajectory> d, const EstimatorConfig& c)
      : data(d), hist(prepare_dataset(d)), msm(std::span<const SubjectHistory>(hist)), cfg(c) {}
};

EstimateWithUncertainty run_naive(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const std::size_t n = ctx.hist.size();
  const std::vector<double> ones(n, 1.0);
  const auto full = fit_msm(ctx.msm, ones, cfg.msm);
  auto reps = run_replicates(cfg.replicate_count, cfg.threads, [&](std::size_t k) {
    RngStream rng(derive_seed(cfg.seed, {kFamilyNaive}), k);
    const auto counts = to_double(draw_multinomial_counts(n, rng));
    Replicate r;
    r.params = fit_msm(ctx.msm, counts, cfg.msm).params;
    r.max_weight = 1.0;
    return r;
  });
  auto est = summarize(EstimatorKind::Naive, reps, cfg);
  est.full_data_fit = full.params;
  return est;
}

// IgnoreU and ObservedU pipelines. For IgnoreU both the untruncated and the
// truncated fits are produced from the same resamples.
struct FreqResult {
  std::optional<EstimateWithUncertainty> plain, truncated;
};

FreqResult run_weighted(const Context& ctx, bool observed_u, bool want_plain, bool want_trunc) {
  const auto& cfg = ctx.cfg;
  const std::size_t n = ctx.hist.size();
  const auto mle_opt = treatment_only(cfg.mle);
  const MleModel model = observed_u ? MleModel::ObsObservedU : MleModel::ObsIgnoreU;
  const UPolicy policy = observed_u ? UPolicy::Observed : UPolicy::Ignore;
  const std::uint64_t family = observed_u ? kFamilyObservedU : kFamilyIgnoreU;
  const std::vector<double> ones(n, 1.0);

  auto weights_for = [&](std::span<const double> freq) {
    const auto th = fit_mle(ctx.hist, model, freq, mle_opt).theta;
    const auto al = fit_mle(ctx.hist, MleModel::ExpMarginal, freq, mle_opt).alpha;
    return stabilized_weights(ctx.hist, th, al, policy).weights;
  };

  // Full-data fits.
  const auto w_full = weights_for({});
  std::optional<MsmParams> full_plain, full_trunc;
  double full_max_plain = max_of(w_full);
  double full_max_trunc = 0.0;
  if (want_plain) full_plain = fit_msm(ctx.msm, w_full, cfg.msm).params;
  if (want_trunc) {
    const auto wt = truncate_weights(w_full, ones, cfg.trunc_percentile);
    full_max_trunc = max_of(wt);
    full_trunc = fit_msm(ctx.msm, wt, cfg.msm).params;
  }

  std::vector<Replicate> plain(static_cast<std::size_t>(cfg.replicate_count));
  std::vector<Replicate> trunc(static_cast<std::size_t>(cfg.replicate_count));
  parallel_for(plain.size(), cfg.threads, [&](std::size_t k) {
    RngStream rng(derive_seed(cfg.seed, {family}), k);
    const auto counts = to_double(draw_multinomial_counts(n, rng));
    std::vector<double> w;
    try {
      w = weights_for(counts);
    } catch (const Error& e) {
      plain[k].error = trunc[k].error = e.what();
      return;
    }
    if (want_plain) {
      try {
        plain[k].params = fit_msm(ctx.msm, product(counts, w), cfg.msm).params;
        plain[k].max_weight = max_of(w);
        plain[k].ok = true;
      } catch (const Error& e) {
        plain[k].error = e.what();
      }
    }
    if (want_trunc) {
      try {
        const auto wt = truncate_weights(w, counts, cfg.trunc_percentile);
        trunc[k].params = fit_msm(ctx.msm, product(counts, wt), cfg.msm).params;
        trunc[k].max_weight = max_of(wt);
        trunc[k].ok = true;
      } catch (const Error& e) {
        trunc[k].error = e.what();
      }
    }
  });

  FreqResult out;
  const EstimatorKind plain_kind = observed_u ? EstimatorKind::ObservedU : EstimatorKind::IgnoreU;
  if (want_plain) {
    out.plain = summarize(plain_kind, plain, cfg);
    out.plain->full_data_fit = full_plain;
    out.plain->max_weight = full_max_plain;
  }
  if (want_trunc) {
    out.truncated = summarize(EstimatorKind::IgnoreUTrunc95, trunc, cfg);
    out.truncated->full_data_fit = full_trunc;
    out.truncated->max_weight = full_max_trunc;
  }
  return out;
}

EstimateWithUncertainty run_bct(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& bo = cfg.bct;
  const std::size_t n = ctx.hist.size();
  const auto theta0 = em_initial_theta(ctx.hist, bo.em_iterations, cfg.mle);
  const auto alpha0 = fit_mle(ctx.hist, MleModel::ExpMarginal, {}, cfg.mle).alpha;

  SamplerConfig sc = bo.sampler;
  sc.n_iterations = sc.n_burnin + cfg.replicate_count * sc.n_thin;
  sc.seed = derive_seed(cfg.seed, {kFamilyBct, 0});
  const auto sample = sample_posterior(ctx.hist, bo.priors, sc, {theta0, alpha0, {}, {}});

  const std::size_t draws = sample.draws.size();
  std::vector<Replicate> reps(draws);
  parallel_for(draws, cfg.threads, [&](std::size_t k) {
    const auto& d = sample.draws[k];
    RngStream rng(derive_seed(cfg.seed, {kFamilyBct, 1}), k);
    try {
      std::vector<int> u(n, 0);
      if (bo.u_policy == UPolicy::Imputed) {
        for (std::size_t i = 0; i < n; ++i) u[i] = rng.bernoulli(conditional_posterior_u(ctx.hist[i], d.theta)) ? 1 : 0;
      }
      require(bo.u_policy == UPolicy::Imputed || bo.u_policy == UPolicy::Marginalized, ErrorKind::Config,
              "BCT supports the imputed and marginalized u policies");
      auto ws = stabilized_weights(ctx.hist, d.theta, d.alpha, bo.u_policy, u);
      reps[k].max_weight = max_of(ws.weights);
      if (bo.truncation < 100.0) ws = truncate_weights(std::move(ws), bo.truncation);
      const auto counts = to_double(draw_multinomial_counts(n, rng));
      reps[k].params = fit_msm(ctx.msm, product(counts, ws.weights), cfg.msm).params;
      reps[k].ok = true;
    } catch (const Error& e) {
      reps[k].error = e.what();
    }
  });
  auto est = summarize(EstimatorKind::Bct, reps, cfg);
  est.max_weight = est.max_replicate_weight;
  est.diagnostics = sample.diagnostics;
  return est;
}

}  // namespace

const char* to_string(EstimatorKind k) noexcept {
  switch (k) {
    case EstimatorKind::Naive: return "Naive";
    case EstimatorKind::IgnoreU: return "CT-IPTW-IgnoreU";
    case EstimatorKind::IgnoreUTrunc95: return "CT-IPTW-IgnoreU-trunc95";
    case EstimatorKind::ObservedU: return "CT-IPTW-ObservedU";
    case EstimatorKind::Bct: return "BCT-MSMs-ConsiderU";
  }
  return "?";
}

std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  for (auto k : kAllEstimators) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::array<double, 4> as_array(const MsmParams& p) { return {p.eta1, p.eta2, p.eta3, p.sigma}; }

void validate(const EstimatorConfig& c) {
  require(c.replicate_count >= 2, ErrorKind::Config, "replicate_count must be >= 2");
  require(c.trunc_percentile > 0.0 && c.trunc_percentile <= 100.0, ErrorKind::Config,
          "truncation percentile must lie in (0, 100]");
  require(c.bct.truncation > 0.0 && c.bct.truncation <= 100.0, ErrorKind::Config,
          "BCT truncation percentile must lie in (0, 100]");
  require(c.max_failure_fraction >= 0.0 && c.max_failure_fraction < 1.0, ErrorKind::Config,
          "max_failure_fraction must lie in [0, 1)");
  require(c.bct.u_policy == UPolicy::Imputed || c.bct.u_policy == UPolicy::Marginalized, ErrorKind::Config,
          "BCT u policy must be imputed or marginalized");
  require(c.bct.em_iterations >= 0, ErrorKind::Config, "em_iterations must be >= 0");
  SamplerConfig sc = c.bct.sampler;
  sc.n_iterations = sc.n_burnin + c.replicate_count * std::max(sc.n_thin, 1);
  validate(sc);
}

std::map<EstimatorKind, EstimateWithUncertainty> run_estimators(std::span<const EstimatorKind> kinds,
                                                                std::span<const Trajectory> data,
                                                                const EstimatorConfig& cfg) {
  validate(cfg);
  require(data.size() >= 3, ErrorKind::Input, "estimators need at least 3 subjects");
  auto has = [&](EstimatorKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  const Context ctx(data, cfg);
  std::map<EstimatorKind, EstimateWithUncertainty> out;
  if (has(EstimatorKind::Naive)) out.emplace(EstimatorKind::Naive, run_naive(ctx));
  if (has(EstimatorKind::IgnoreU) || has(EstimatorKind::IgnoreUTrunc95)) {
    auto r = run_weighted(ctx, false, has(EstimatorKind::IgnoreU), has(EstimatorKind::IgnoreUTrunc95));
    if (r.plain) out.emplace(EstimatorKind::IgnoreU, std::move(*r.plain));
    if (r.truncated) out.emplace(EstimatorKind::IgnoreUTrunc95, std::move(*r.truncated));
  }
  if (has(EstimatorKind::ObservedU)) out.emplace(EstimatorKind::ObservedU, *run_weighted(ctx, true, true, false).plain);
  if (has(EstimatorKind::Bct)) out.emplace(EstimatorKind::Bct, run_bct(ctx));
  return out;
}

EstimateWithUncertainty run_estimator(EstimatorKind kind, std::span<const Trajectory> data,
                                      const EstimatorConfig& cfg) {
  const std::array<EstimatorKind, 1> kinds{kind};
  return std::move(run_estimators(kinds, data, cfg).at(kind));
}

MsmParams true_eta(const ExpWorldParams& alpha, const ScenarioConfig& scenario, int m, std::uint64_t seed,
                   int threads, const MsmFitOptions& options) {
  require(m >= 1000, ErrorKind::Config, "true_eta needs m >= 1000");
  ScenarioConfig sc = scenario;
  sc.exp_params = alpha;
  const auto data = simulate_dataset(sc, World::Experimental, m, seed, 0, threads);
  const MsmData msm{std::span<const Trajectory>(data)};
  const std::vector<double> ones(data.size(), 1.0);
  return fit_msm(msm, ones, options).params;
}

}  // namespace ctmsm
