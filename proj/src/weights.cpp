#include "weights.hpp"

#include <cmath>

#include "errors.hpp"
#include "posterior.hpp"
#include "stats.hpp"

namespace ctmsm {

const char* to_string(UPolicy p) noexcept {
  switch (p) {
    case UPolicy::Ignore: return "ignore";
    case UPolicy::Observed: return "observed";
    case UPolicy::Imputed: return "imputed";
    case UPolicy::Marginalized: return "marginalized";
  }
  return "?";
}

double log_stabilized_weight(const SubjectHistory& h, const ObsWorldParams& th, const ExpWorldParams& al,
                             UPolicy policy, int imputed_u) {
  const double num = log_lik_A(h, al) + log_lik_Tmax(h, al);
  double den_a = 0.0;
  switch (policy) {
    case UPolicy::Ignore:
      den_a = log_lik_A(h, th, 0);
      break;
    case UPolicy::Observed:
      require(h.u.has_value(), ErrorKind::Input, "observed-u weights need u for every subject");
      den_a = log_lik_A(h, th, *h.u);
      break;
    case UPolicy::Imputed:
      den_a = log_lik_A(h, th, imputed_u);
      break;
    case UPolicy::Marginalized: {
      const double p1 = conditional_posterior_u(h, th);
      const double a0 = log_lik_A(h, th, 0), a1 = log_lik_A(h, th, 1);
      double lw0 = p1 < 1.0 ? a0 + std::log1p(-p1) : -INFINITY;
      double lw1 = p1 > 0.0 ? a1 + std::log(p1) : -INFINITY;
      den_a = log_sum_exp(lw0, lw1);
      break;
    }
  }
  return num - den_a - log_lik_Tmax(h, th);
}

WeightedSample stabilized_weights(std::span<const SubjectHistory> data, const ObsWorldParams& th,
                                  const ExpWorldParams& al, UPolicy policy, std::span<const int> imputed_u) {
  require(policy != UPolicy::Imputed || imputed_u.size() == data.size(), ErrorKind::Input,
          "imputed-u weights need one u per subject");
  WeightedSample s;
  s.provenance = std::string("stabilized weights, u policy ") + to_string(policy);
  s.weights.resize(data.size());
  s.pi.assign(data.size(), data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int u = policy == UPolicy::Imputed ? imputed_u[i] : 0;
    const double w = std::exp(log_stabilized_weight(data[i], th, al, policy, u));
    if (!std::isfinite(w) || !(w > 0.0)) {
      fail(ErrorKind::Evaluation,
           "stabilized weight of subject index " + std::to_string(i) + " is not a finite positive number");
    }
    s.weights[i] = w;
  }
  return s;
}

WeightedSample truncate_weights(WeightedSample s, double pct) {
  require(!s.weights.empty(), ErrorKind::Domain, "truncate_weights: empty sample");
  require(pct > 0.0 && pct <= 100.0, ErrorKind::Domain, "truncation percentile must lie in (0, 100]");
  const double cap = percentile(s.weights, pct);
  for (auto& w : s.weights) w = std::min(w, cap);
  s.provenance += ", truncated at percentile " + std::to_string(pct);
  return s;
}

std::vector<double> truncate_weights(std::span<const double> w, std::span<const double> mult, double pct) {
  require(pct > 0.0 && pct <= 100.0, ErrorKind::Domain, "truncation percentile must lie in (0, 100]");
  const double cap = percentile_weighted(w, mult, pct);
  std::vector<double> out(w.begin(), w.end());
  for (auto& v : out) v = std::min(v, cap);
  return out;
}

std::vector<int> draw_multinomial_counts(std::size_t n, RngStream& rng) {
  require(n >= 1, ErrorKind::Domain, "bootstrap needs n >= 1");
  std::vector<int> counts(n, 0);
  for (std::size_t k = 0; k < n; ++k) ++counts[rng.below(n)];
  return counts;
}

std::vector<double> draw_bayesian_bootstrap(std::size_t n, RngStream& rng) {
  const auto counts = draw_multinomial_counts(n, rng);
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  return pi;
}

}  // namespace ctmsm
