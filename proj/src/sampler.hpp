#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "intensity.hpp"
#include "mle.hpp"
#include "posterior.hpp"

namespace ctmsm {

struct SamplerConfig {
  int n_iterations = 4000;
  int n_burnin = 2000;
  int n_thin = 10;
  int adapt_window = 50;
  // Multiplier on the initial proposal scale, keyed by block name
  // (A1, A2, Y, U, Tmax, L, ExpA1, ExpA2, ExpTmax).
  std::map<std::string, double> proposal_scale;
  bool adapt_covariance = true;
  bool sample_alpha = true;
  std::uint64_t seed = 1;
};

// Throws Config when the configuration is unusable.
void validate(const SamplerConfig& config);

struct PosteriorDraw {
  ObsWorldParams theta;
  ExpWorldParams alpha;
  double log_post = 0.0;
  int draw_index = 0;
};

struct BlockDiagnostics {
  std::string name;
  double acceptance_rate = 0.0;  // after burn-in
  double burnin_acceptance_rate = 0.0;
  double final_scale = 0.0;
  int proposals = 0;
};

struct CoordinateSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
};

struct SamplerDiagnostics {
  std::vector<BlockDiagnostics> blocks;
  std::vector<CoordinateSummary> coordinates;  // free coordinates only
};

struct PosteriorSample {
  std::vector<PosteriorDraw> draws;
  SamplerDiagnostics diagnostics;
};

// Starting point and the coordinates that move (all when a mask is empty).
struct SamplerInit {
  ObsWorldParams theta;
  ExpWorldParams alpha;
  std::vector<bool> theta_free;
  std::vector<bool> alpha_free;
};

// Adaptive block random-walk Metropolis on log_posterior_obs, and on the
// experimental-world likelihood for alpha. Proposal covariances start from
// the inverse finite-difference Hessian of each block at the initial point;
// scales adapt toward acceptance 0.25 during burn-in only. Throws Diagnostics
// when a block accepts nothing after burn-in.
PosteriorSample sample_posterior(std::span<const SubjectHistory> data, const Priors& priors,
                                 const SamplerConfig& config, const SamplerInit& init);

// Starting point for the observational chain: the ignore-u MLE, a split on
// the outcome residual, then EM iterations over the binary u.
ObsWorldParams em_initial_theta(std::span<const SubjectHistory> data, int iterations = 30,
                                const MleOptions& options = {});

// Effective sample size from the initial positive sequence of autocorrelations.
double effective_sample_size(std::span<const double> chain);

}  // namespace ctmsm
