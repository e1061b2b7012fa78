#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "intensity.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace ctmsm {

struct WeightedSample {
  std::vector<double> weights;  // w_i
  std::vector<double> pi;       // Bayesian-bootstrap weights, sum 1
  std::string provenance;
};

// How the observational denominator treats the confounder.
//   Ignore       - u = 0 in the denominator (theta fitted without u)
//   Observed     - the stored u of each subject
//   Imputed      - caller-supplied u vector
//   Marginalized - sum_u p_A(u) P(u | record, theta)
enum class UPolicy { Ignore, Observed, Imputed, Marginalized };

const char* to_string(UPolicy p) noexcept;

// Log of the per-subject stabilized weight
//   A_E + Tmax_E - A_O(u) - Tmax_O.
double log_stabilized_weight(const SubjectHistory& h, const ObsWorldParams& theta, const ExpWorldParams& alpha,
                             UPolicy policy, int imputed_u = 0);

// Throws Input when the policy lacks its inputs and Evaluation naming the
// subject when a weight is not a finite positive number.
WeightedSample stabilized_weights(std::span<const SubjectHistory> data, const ObsWorldParams& theta,
                                  const ExpWorldParams& alpha, UPolicy policy,
                                  std::span<const int> imputed_u = {});

// Caps weights at the given percentile of the weights (linear interpolation
// between order statistics). percentile must lie in (0, 100].
WeightedSample truncate_weights(WeightedSample sample, double percentile);

// Same cap, with the percentile taken over the sample in which subject i
// appears multiplicity[i] times.
std::vector<double> truncate_weights(std::span<const double> weights, std::span<const double> multiplicity,
                                     double percentile);

// Multinomial(n; 1/n, ..., 1/n) counts.
std::vector<int> draw_multinomial_counts(std::size_t n, RngStream& rng);
// counts / n.
std::vector<double> draw_bayesian_bootstrap(std::size_t n, RngStream& rng);

}  // namespace ctmsm
