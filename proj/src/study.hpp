#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "estimators.hpp"

namespace ctmsm {

struct MetricsRow {
  std::string scenario;
  std::string estimator;
  std::string parameter;  // "eta2" or "eta3"
  Metrics metrics;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string error;
  MsmParams point;
  std::array<double, 4> sd{};
  std::array<Interval, 4> interval_95{};
  double max_weight = 0.0;
  int replicate_failures = 0;
};

struct EstimatorStudy {
  EstimatorKind kind = EstimatorKind::Naive;
  std::vector<ReplicationOutcome> replications;
  int effective = 0;  // replications that produced an estimate
};

struct StudyResult {
  std::string label;
  MsmParams truth;
  std::vector<EstimatorStudy> estimators;
  std::vector<MetricsRow> rows;
};

using StudyLogger = std::function<void(const std::string&)>;

// Truth once via true_eta, then per replication a fresh observational dataset
// and every requested estimator. Deterministic in the configuration. Throws
// Estimator when an estimator fails in more than 10% of the replications.
StudyResult run_study(const StudyConfig& config, int threads = 1, const StudyLogger& log = {});

std::string metrics_csv(const StudyResult& result);
std::string summary_json(const StudyResult& result, const StudyConfig& config);

// Writes the CSV and the JSON summary into `out_dir` (created when missing).
void write_study_outputs(const StudyResult& result, const StudyConfig& config, const std::string& out_dir);

// Seeds used by the study, exposed for reproducing single pieces.
std::uint64_t study_truth_seed(std::uint64_t master);
std::uint64_t study_data_seed(std::uint64_t master);
std::uint64_t study_estimator_seed(std::uint64_t master, int replication);

}  // namespace ctmsm
