#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "params.hpp"

namespace ctmsm {

struct DoseJump {
  double time = 0.0;
  double dose = 0.0;
};

// Half-open [start, end) piece of a piecewise-constant path.
struct Segment {
  double start = 0.0;
  double end = 0.0;
  double dose = 0.0;
};

// Piecewise-constant, right-continuous dose path. The dose is 0 before the
// first jump and after end_time (the treatment end T_max).
class TreatmentPath {
 public:
  TreatmentPath() = default;
  TreatmentPath(std::vector<DoseJump> jumps, double end_time)
      : jumps_(std::move(jumps)), end_time_(end_time) {}

  const std::vector<DoseJump>& jumps() const noexcept { return jumps_; }
  double end_time() const noexcept { return end_time_; }

  // A(t). Throws Domain for t < 0.
  double dose_at(double t) const;
  // A(t-). Throws Domain for t <= 0.
  double dose_left_limit(double t) const;
  // Contiguous partition of [0, upto]; throws Domain unless 0 < upto <= end_time.
  std::vector<Segment> segments(double upto) const;
  std::vector<Segment> segments() const { return segments(end_time_); }

 private:
  std::vector<DoseJump> jumps_;
  double end_time_ = 0.0;
};

// Step function of the time-varying covariate on its observation grid. Values
// are carried forward past the last grid point.
class CovariatePath {
 public:
  CovariatePath() = default;
  CovariatePath(std::vector<double> grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {}

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double value_at(double t) const;
  double value_left_limit(double t) const;

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
};

struct Trajectory {
  std::int64_t id = 0;
  std::vector<double> z;
  std::optional<int> u;
  CovariatePath l_path;
  TreatmentPath a_path;
  double t_max = 0.0;
  int terminated = 0;  // N^{Tmax}(t_R)
  double y = 0.0;
};

struct ScenarioConfig {
  int n = 400;
  double t_R = 10.0;
  double dt = 0.01;
  double delta_L = 0.5;
  int p_Z = 2;
  ObsWorldParams obs_params;
  ExpWorldParams exp_params;
  std::uint64_t seed = 1;
};

// Tolerance used for grid-alignment and end-time comparisons.
inline constexpr double kTimeTolerance = 1e-9;

// Every violated invariant of the trajectory's contained types; empty when ok.
std::vector<std::string> validate(const Trajectory& trajectory, double t_R);
std::vector<std::string> validate(const ScenarioConfig& config);

// Validates every record plus dataset-level invariants (unique ids, one p_Z).
std::vector<std::string> validate_dataset(const std::vector<Trajectory>& data, double t_R);

}  // namespace ctmsm
