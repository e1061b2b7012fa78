#pragma once

#include <array>
#include <span>
#include <vector>

#include "event_paths.hpp"
#include "intensity.hpp"

namespace ctmsm {

struct MsmParams {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double eta3 = 0.0;
  double sigma = 1.0;
};

struct FitResult {
  MsmParams params;
  bool converged = false;
  double objective = 0.0;
  int evaluations = 0;
  bool at_lower_bound = false;  // eta3 == 0
  bool at_upper_bound = false;  // eta3 == eta3_max
};

struct MsmFitOptions {
  double eta3_max = 50.0;
  double eta3_tol = 1e-6;
  int grid_points = 40;
};

// Integral of a(t) exp(-eta3 (t_max - t) / t_max) over [0, t_max].
double exposure_integral(const TreatmentPath& path, double t_max, double eta3);
double exposure_integral(std::span<const Segment> segments, double t_max, double eta3);
// Derivative of the above with respect to eta3.
double exposure_integral_deta3(std::span<const Segment> segments, double t_max, double eta3);

double msm_log_density(double y, double t_max, const TreatmentPath& path, const MsmParams& params);

// Outcome, end time and dose segments of every subject, with the segment
// geometry pre-scaled for repeated kernel evaluation.
class MsmData {
 public:
  MsmData() = default;
  explicit MsmData(std::span<const Trajectory> data);
  explicit MsmData(std::span<const SubjectHistory> data);

  std::size_t size() const noexcept { return y_.size(); }
  double y(std::size_t i) const { return y_[i]; }
  double t_max(std::size_t i) const { return t_max_[i]; }

  double exposure(std::size_t i, double eta3) const;
  // Exposure and its eta3-derivative.
  std::array<double, 2> exposure_with_derivative(std::size_t i, double eta3) const;

 private:
  void add(double y, double t_max, std::span<const Segment> segments);

  std::vector<double> y_;
  std::vector<double> t_max_;
  std::vector<std::size_t> offset_;
  // Per segment: dose * t_max, scaled distance of its right end to t_max,
  // scaled length.
  std::vector<double> seg_scale_;
  std::vector<double> seg_ulo_;
  std::vector<double> seg_len_;
};

// Sum_i w_i log p(y_i | t_max_i, a_i, eta). Throws Input on a negative or
// non-finite weight or a length mismatch.
double weighted_pseudo_loglik(const MsmData& data, std::span<const double> weights, const MsmParams& params);
// Gradient with respect to (eta1, eta2, eta3, log sigma).
std::array<double, 4> weighted_pseudo_loglik_gradient(const MsmData& data, std::span<const double> weights,
                                                      const MsmParams& params);

// Profile maximizer: closed-form weighted least squares for (eta1, eta2,
// sigma) at fixed eta3, bracketed 1-D search over eta3 in [0, eta3_max].
FitResult fit_msm(const MsmData& data, std::span<const double> weights, const MsmFitOptions& options = {});

// Max abs deviation between the analytic gradient and central differences
// with step 1e-5 in (eta1, eta2, eta3, log sigma).
double profile_objective_grad_check(const MsmData& data, std::span<const double> weights,
                                    const MsmParams& params);

}  // namespace ctmsm
