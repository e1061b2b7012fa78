#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "event_paths.hpp"

namespace ctmsm {

struct StudyConfig {
  ScenarioConfig scenario;
  std::string label = "scenario";
  std::optional<double> delta;  // sets delta_rate = delta_mark when present
  int replications = 1;
  std::vector<EstimatorKind> estimators;
  int true_eta_m = 50000;
  std::uint64_t master_seed = 1;
  std::string metrics_file = "metrics.csv";
  std::string summary_file = "summary.json";
  EstimatorConfig estimation;  // replicate_count lives here
};

// Parses the JSON configuration text. Every section is optional; unknown keys
// are rejected. Throws Config with the offending key path.
StudyConfig parse_config(const std::string& text);
StudyConfig load_config(const std::string& path);

// Canonical JSON text of a configuration (round-trips through parse_config).
std::string to_json(const StudyConfig& config);

// Scenario with the study's confounding level applied.
ScenarioConfig effective_scenario(const StudyConfig& config);

// Built-in default scenario (t_R = 10, dt = 0.01, delta_L = 0.5, p_Z = 2).
ScenarioConfig default_scenario();

}  // namespace ctmsm
