#pragma once

#include <cstdint>
#include <vector>

#include "event_paths.hpp"
#include "rng.hpp"

namespace ctmsm {

// One subject on the dt grid. Per step: L is redrawn when t is a covariate
// grid time, then a treatment change is drawn, then t advances and treatment
// termination is drawn. Under the experimental world the treatment and
// termination draws use the experimental parameters; L, U, Z and Y do not
// change.
Trajectory simulate_subject(const ScenarioConfig& config, World world, RngStream& rng, std::int64_t id);

// n subjects; subject i uses the stream keyed by (seed, replication, i).
std::vector<Trajectory> simulate_dataset(const ScenarioConfig& config, World world, int n, std::uint64_t seed,
                                         std::uint64_t replication = 0, int threads = 1);

struct DatasetMoments {
  std::size_t n = 0;
  double mean_jumps = 0.0;
  double jump_rate = 0.0;      // total jumps / total time on treatment
  double jump_rate_u0 = 0.0;   // same among u = 0 (NaN when absent)
  double jump_rate_u1 = 0.0;   // same among u = 1 (NaN when absent)
  double mean_t_max = 0.0;
  double terminated_fraction = 0.0;
  double mean_y = 0.0;
  double mean_dose = 0.0;      // mean of the post-jump doses
  double sd_dose = 0.0;
  double mean_u = 0.0;         // NaN when no subject carries u
};

// Throws Domain on an empty dataset.
DatasetMoments empirical_moments(const std::vector<Trajectory>& data);

}  // namespace ctmsm
