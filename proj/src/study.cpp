#include "study.hpp"

#include <cstdio>
#include <filesystem>
#include <mutex>

#include <json.hpp>

#include "dataset_io.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulator.hpp"

namespace ctmsm {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTruthKey = 101;
constexpr std::uint64_t kDataKey = 202;
constexpr std::uint64_t kEstimatorKey = 303;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json params_json(const MsmParams& p) {
  return {{"eta1", p.eta1}, {"eta2", p.eta2}, {"eta3", p.eta3}, {"sigma", p.sigma}};
}

}  // namespace

std::uint64_t study_truth_seed(std::uint64_t master) { return derive_seed(master, {kTruthKey}); }
std::uint64_t study_data_seed(std::uint64_t master) { return derive_seed(master, {kDataKey}); }
std::uint64_t study_estimator_seed(std::uint64_t master, int r) {
  return derive_seed(master, {kEstimatorKey, static_cast<std::uint64_t>(r)});
}

StudyResult run_study(const StudyConfig& cfg, int threads, const StudyLogger& log) {
  require(cfg.replications >= 1, ErrorKind::Config, "replications must be >= 1");
  require(!cfg.estimators.empty(), ErrorKind::Config, "estimator list is empty");
  validate(cfg.estimation);
  const ScenarioConfig sc = effective_scenario(cfg);
  {
    const auto issues = validate(sc);
    if (!issues.empty()) fail(ErrorKind::Config, "scenario is invalid: " + issues.front());
  }
  threads = resolve_threads(threads);

  StudyResult res;
  res.label = cfg.label;
  if (log) log("computing true eta with m = " + std::to_string(cfg.true_eta_m));
  res.truth = true_eta(sc.exp_params, sc, cfg.true_eta_m, study_truth_seed(cfg.master_seed), threads,
                       cfg.estimation.msm);
  if (log) log("true eta2 = " + fmt(res.truth.eta2) + ", eta3 = " + fmt(res.truth.eta3));

  const auto R = static_cast<std::size_t>(cfg.replications);
  res.estimators.resize(cfg.estimators.size());
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    res.estimators[e].kind = cfg.estimators[e];
    res.estimators[e].replications.resize(R);
  }

  std::mutex log_mutex;
  parallel_for(R, threads, [&](std::size_t r) {
    const auto data = simulate_dataset(sc, World::Observational, sc.n, study_data_seed(cfg.master_seed), r, 1);
    EstimatorConfig ec = cfg.estimation;
    ec.seed = study_estimator_seed(cfg.master_seed, static_cast<int>(r));
    ec.threads = 1;
    // Each estimator runs separately so one failure does not discard the others;
    // IgnoreU and its truncated variant are still computed together.
    std::vector<std::vector<EstimatorKind>> groups;
    std::vector<EstimatorKind> ignore_group;
    for (auto k : cfg.estimators) {
      if (k == EstimatorKind::IgnoreU || k == EstimatorKind::IgnoreUTrunc95) {
        ignore_group.push_back(k);
      } else {
        groups.push_back({k});
      }
    }
    if (!ignore_group.empty()) groups.push_back(ignore_group);
    for (const auto& g : groups) {
      std::map<EstimatorKind, EstimateWithUncertainty> out;
      std::string error;
      try {
        out = run_estimators(g, data, ec);
      } catch (const Error& e) {
        error = e.what();
      }
      for (auto k : g) {
        std::size_t e = 0;
        while (cfg.estimators[e] != k) ++e;
        auto& o = res.estimators[e].replications[r];
        auto it = out.find(k);
        if (it == out.end()) {
          o.ok = false;
          o.error = error.empty() ? "no result" : error;
          continue;
        }
        const auto& est = it->second;
        o.ok = true;
        o.point = est.point;
        o.sd = est.sd;
        o.interval_95 = est.interval_95;
        o.max_weight = std::max(est.max_weight, est.max_replicate_weight);
        o.replicate_failures = est.failures;
      }
    }
    if (log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      log("replication " + std::to_string(r + 1) + " of " + std::to_string(R) + " done");
    }
  });

  for (auto& es : res.estimators) {
    std::vector<double> p2, p3, s2, s3;
    std::vector<Interval> i2, i3;
    int failed = 0;
    std::string first_error;
    for (const auto& o : es.replications) {
      if (!o.ok) {
        ++failed;
        if (first_error.empty()) first_error = o.error;
        continue;
      }
      p2.push_back(o.point.eta2);
      p3.push_back(o.point.eta3);
      s2.push_back(o.sd[1]);
      s3.push_back(o.sd[2]);
      i2.push_back(o.interval_95[1]);
      i3.push_back(o.interval_95[2]);
    }
    es.effective = static_cast<int>(p2.size());
    if (static_cast<double>(failed) > 0.10 * static_cast<double>(R) || p2.empty()) {
      fail(ErrorKind::Estimator, std::string(to_string(es.kind)) + " failed in " + std::to_string(failed) + " of " +
                                     std::to_string(R) + " replications (first: " + first_error + ")");
    }
    if (failed > 0 && log) {
      log(std::string(to_string(es.kind)) + ": " + std::to_string(failed) + " replication(s) failed: " + first_error);
    }
    res.rows.push_back({cfg.label, to_string(es.kind), "eta2", compute_metrics(p2, s2, i2, res.truth.eta2)});
    res.rows.push_back({cfg.label, to_string(es.kind), "eta3", compute_metrics(p3, s3, i3, res.truth.eta3)});
  }
  return res;
}

std::string metrics_csv(const StudyResult& res) {
  std::string out = "scenario,estimator,parameter,bias,sd,se,cp95,lci\n";
  for (const auto& r : res.rows) {
    const auto& m = r.metrics;
    out += csv_field(r.scenario) + "," + csv_field(r.estimator) + "," + r.parameter + "," + fmt(m.bias) + "," +
           fmt(m.sd) + "," + fmt(m.se) + "," + fmt(m.cp95) + "," + fmt(m.lci) + "\n";
  }
  return out;
}

std::string summary_json(const StudyResult& res, const StudyConfig& cfg) {
  json j;
  j["label"] = res.label;
  j["replications"] = cfg.replications;
  j["master_seed"] = cfg.master_seed;
  if (cfg.delta) j["delta"] = *cfg.delta;
  j["truth"] = params_json(res.truth);
  json rows = json::array();
  for (const auto& r : res.rows) {
    const auto& m = r.metrics;
    rows.push_back({{"estimator", r.estimator},
                    {"parameter", r.parameter},
                    {"bias", m.bias},
                    {"sd", m.sd},
                    {"sd_defined", m.sd_defined},
                    {"se", m.se},
                    {"cp95", m.cp95},
                    {"lci", m.lci},
                    {"effective_replications", m.count}});
  }
  j["metrics"] = rows;
  json ests = json::array();
  for (const auto& es : res.estimators) {
    json reps = json::array();
    int failures = 0;
    double max_w = 0.0;
    for (const auto& o : es.replications) {
      if (!o.ok) {
        ++failures;
        reps.push_back({{"ok", false}, {"error", o.error}});
        continue;
      }
      max_w = std::max(max_w, o.max_weight);
      reps.push_back({{"ok", true},
                      {"point", params_json(o.point)},
                      {"sd", {{"eta2", o.sd[1]}, {"eta3", o.sd[2]}}},
                      {"interval_95",
                       {{"eta2", {o.interval_95[1].lo, o.interval_95[1].hi}},
                        {"eta3", {o.interval_95[2].lo, o.interval_95[2].hi}}}},
                      {"max_weight", o.max_weight},
                      {"replicate_failures", o.replicate_failures}});
    }
    ests.push_back({{"estimator", to_string(es.kind)},
                    {"effective_replications", es.effective},
                    {"failed_replications", failures},
                    {"max_weight", max_w},
                    {"replications", reps}});
  }
  j["estimators"] = ests;
  return j.dump(2) + "\n";
}

void write_study_outputs(const StudyResult& res, const StudyConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory " + out_dir);
  write_text_atomic((fs::path(out_dir) / cfg.metrics_file).string(), metrics_csv(res));
  write_text_atomic((fs::path(out_dir) / cfg.summary_file).string(), summary_json(res, cfg));
}

}  // namespace ctmsm
