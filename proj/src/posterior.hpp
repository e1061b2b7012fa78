#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intensity.hpp"
#include "params.hpp"

namespace ctmsm {

// Unconstrained sampling coordinates of the observational parameters. Scales
// are on the log scale and theta_U on the logit scale; c_kernel keeps its
// natural scale with support [0, inf).
enum class ThetaBlock { A1, A2, Y, U, Tmax, L };
enum class AlphaBlock { A1, A2, Tmax };

class ThetaLayout {
 public:
  explicit ThetaLayout(int p_z);

  int p_z() const noexcept { return p_z_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  int index(const std::string& name) const;  // -1 when unknown
  const std::vector<int>& block(ThetaBlock b) const { return blocks_[static_cast<std::size_t>(b)]; }

  Eigen::VectorXd pack(const ObsWorldParams& theta) const;
  ObsWorldParams unpack(const Eigen::VectorXd& x) const;

 private:
  int p_z_;
  std::vector<std::string> names_;
  std::vector<std::vector<int>> blocks_;
};

class AlphaLayout {
 public:
  AlphaLayout();
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  int index(const std::string& name) const;
  const std::vector<int>& block(AlphaBlock b) const { return blocks_[static_cast<std::size_t>(b)]; }
  Eigen::VectorXd pack(const ExpWorldParams& alpha) const;
  ExpWorldParams unpack(const Eigen::VectorXd& x) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<int>> blocks_;
};

const char* to_string(ThetaBlock b) noexcept;
const char* to_string(AlphaBlock b) noexcept;

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

// Priors on the sampling coordinates: flat unless a Normal prior is named for
// a coordinate; theta_U is Uniform(0, 1) always.
struct Priors {
  std::map<std::string, NormalPrior> normal;
};

// Sum over subjects of log sum_u exp(Y(u) + A(u) + log p(u)) plus the L and
// termination terms. u fields of the data are ignored. Throws Evaluation
// naming the subject on a non-finite term.
double marginal_loglik_obs(std::span<const SubjectHistory> data, const ObsWorldParams& theta);

// Log posterior density (up to a constant) with respect to the sampling
// coordinates. Returns -inf outside the support.
double log_posterior_obs(std::span<const SubjectHistory> data, const ObsWorldParams& theta, const Priors& priors);

// Log prior on the sampling coordinates; -inf outside the support.
double log_prior_theta(const ThetaLayout& layout, const Eigen::VectorXd& x, const Priors& priors);
double log_prior_alpha(const AlphaLayout& layout, const Eigen::VectorXd& x, const Priors& priors);

// Sum over subjects of the experimental-world treatment and termination terms.
double exp_loglik(std::span<const SubjectHistory> data, const ExpWorldParams& alpha);

// P(u = 1 | observed record, theta).
double conditional_posterior_u(const SubjectHistory& h, const ObsWorldParams& theta);
double conditional_posterior_u(const Trajectory& tr, const ObsWorldParams& theta);

// log(exp(a) + exp(b)) without overflow.
double log_sum_exp(double a, double b);

}  // namespace ctmsm
