#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "event_paths.hpp"
#include "msm.hpp"
#include "sampler.hpp"
#include "stats.hpp"
#include "weights.hpp"

namespace ctmsm {

enum class EstimatorKind { Naive, IgnoreU, IgnoreUTrunc95, ObservedU, Bct };

inline constexpr std::array<EstimatorKind, 5> kAllEstimators = {
    EstimatorKind::Naive, EstimatorKind::IgnoreU, EstimatorKind::IgnoreUTrunc95, EstimatorKind::ObservedU,
    EstimatorKind::Bct};

const char* to_string(EstimatorKind k) noexcept;
std::optional<EstimatorKind> parse_estimator(const std::string& name);

struct BctOptions {
  SamplerConfig sampler;  // n_iterations is derived from n_burnin, n_thin and the replicate count
  UPolicy u_policy = UPolicy::Imputed;
  double truncation = 100.0;  // percentile; 100 disables
  int em_iterations = 30;
  Priors priors;
};

struct EstimatorConfig {
  int replicate_count = 200;
  double trunc_percentile = 95.0;
  double max_failure_fraction = 0.10;
  MsmFitOptions msm;
  MleOptions mle;
  BctOptions bct;
  std::uint64_t seed = 1;
  int threads = 1;
};

// Throws Config on an unusable configuration.
void validate(const EstimatorConfig& config);

// Parameter order for the per-parameter arrays: eta1, eta2, eta3, sigma.
struct EstimateWithUncertainty {
  EstimatorKind kind = EstimatorKind::Naive;
  MsmParams point;
  std::vector<MsmParams> replicate_points;
  std::array<double, 4> sd{};
  std::array<Interval, 4> interval_95{};
  int failures = 0;
  std::vector<std::string> failure_messages;
  std::optional<MsmParams> full_data_fit;  // frequentist estimators
  double max_weight = 1.0;                 // largest weight used by the full-data fit (or any draw for BCT)
  double max_replicate_weight = 1.0;       // largest weight over replicates
  SamplerDiagnostics diagnostics;          // BCT only
};

std::array<double, 4> as_array(const MsmParams& p);

// Runs one estimator. Frequentist estimators refit every nuisance model on
// each nonparametric bootstrap resample; BCT fits one MSM per retained
// posterior draw. Throws Estimator when more than max_failure_fraction of
// the replicates fail.
EstimateWithUncertainty run_estimator(EstimatorKind kind, std::span<const Trajectory> data,
                                      const EstimatorConfig& config);

// Runs several estimators on one dataset. IgnoreU and its truncated variant
// share their bootstrap resamples; results are identical to separate runs.
std::map<EstimatorKind, EstimateWithUncertainty> run_estimators(std::span<const EstimatorKind> kinds,
                                                                std::span<const Trajectory> data,
                                                                const EstimatorConfig& config);

// MSM fitted with unit weights to m subjects simulated in the experimental
// world with the given parameters.
MsmParams true_eta(const ExpWorldParams& alpha, const ScenarioConfig& scenario, int m, std::uint64_t seed,
                   int threads = 1, const MsmFitOptions& options = {});

}  // namespace ctmsm
