#include "ctmsm/ctmsm.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include <json.hpp>

#include "config.hpp"
#include "dataset_io.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "simulator.hpp"
#include "study.hpp"

struct ctmsm_config {
  ctmsm::StudyConfig value;
};

struct ctmsm_dataset {
  ctmsm::Dataset value;
};

namespace {

thread_local std::string g_last_error;
thread_local ctmsm_status g_last_status = CTMSM_OK;

ctmsm_status status_of(ctmsm::ErrorKind k) {
  using ctmsm::ErrorKind;
  switch (k) {
    case ErrorKind::Domain: return CTMSM_ERR_ARGUMENT;
    case ErrorKind::Parameter: return CTMSM_ERR_PARAMETER;
    case ErrorKind::Config: return CTMSM_ERR_CONFIG;
    case ErrorKind::Input: return CTMSM_ERR_INPUT;
    case ErrorKind::Parse: return CTMSM_ERR_PARSE;
    case ErrorKind::Validation: return CTMSM_ERR_VALIDATION;
    case ErrorKind::DegenerateFit:
    case ErrorKind::Optimizer:
    case ErrorKind::Evaluation: return CTMSM_ERR_NUMERICAL;
    case ErrorKind::Diagnostics: return CTMSM_ERR_DIAGNOSTICS;
    case ErrorKind::Estimator: return CTMSM_ERR_ESTIMATOR;
    case ErrorKind::Io: return CTMSM_ERR_IO;
    case ErrorKind::Internal: return CTMSM_ERR_INTERNAL;
  }
  return CTMSM_ERR_INTERNAL;
}

ctmsm_status set_error(ctmsm_status s, const std::string& msg) {
  g_last_status = s;
  g_last_error = msg;
  return s;
}

template <class Fn>
ctmsm_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_status = CTMSM_OK;
    g_last_error.clear();
    return CTMSM_OK;
  } catch (const ctmsm::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CTMSM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CTMSM_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(CTMSM_ERR_INTERNAL, "unknown failure");
  }
}

void need(const void* p, const char* what) {
  if (!p) ctmsm::fail(ctmsm::ErrorKind::Domain, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json params_json(const std::array<double, 4>& a) {
  return {{"eta1", a[0]}, {"eta2", a[1]}, {"eta3", a[2]}, {"sigma", a[3]}};
}

}  // namespace

extern "C" {

const char* ctmsm_version(void) { return "1.0.0"; }

const char* ctmsm_last_error(void) { return g_last_error.c_str(); }

ctmsm_status ctmsm_last_status(void) { return g_last_status; }

const char* ctmsm_status_name(ctmsm_status s) {
  switch (s) {
    case CTMSM_OK: return "ok";
    case CTMSM_ERR_ARGUMENT: return "argument";
    case CTMSM_ERR_CONFIG: return "config";
    case CTMSM_ERR_PARAMETER: return "parameter";
    case CTMSM_ERR_INPUT: return "input";
    case CTMSM_ERR_PARSE: return "parse";
    case CTMSM_ERR_VALIDATION: return "validation";
    case CTMSM_ERR_IO: return "io";
    case CTMSM_ERR_NUMERICAL: return "numerical";
    case CTMSM_ERR_DIAGNOSTICS: return "diagnostics";
    case CTMSM_ERR_ESTIMATOR: return "estimator";
    case CTMSM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void ctmsm_string_free(char* s) { std::free(s); }

ctmsm_status ctmsm_config_default(ctmsm_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ctmsm_config{ctmsm::parse_config("{}")};
  });
}

ctmsm_status ctmsm_config_parse(const char* text, ctmsm_config** out) {
  return guarded([&] {
    need(text, "json_text");
    need(out, "out");
    *out = new ctmsm_config{ctmsm::parse_config(text)};
  });
}

ctmsm_status ctmsm_config_load(const char* path, ctmsm_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ctmsm_config{ctmsm::load_config(path)};
  });
}

void ctmsm_config_free(ctmsm_config* c) { delete c; }

ctmsm_status ctmsm_config_to_json(const ctmsm_config* c, char** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    *out = dup_string(ctmsm::to_json(c->value));
  });
}

ctmsm_status ctmsm_config_set_master_seed(ctmsm_config* c, uint64_t seed) {
  return guarded([&] {
    need(c, "config");
    c->value.master_seed = seed;
  });
}

ctmsm_status ctmsm_config_set_replicate_count(ctmsm_config* c, int count) {
  return guarded([&] {
    need(c, "config");
    auto e = c->value.estimation;
    e.replicate_count = count;
    ctmsm::validate(e);
    c->value.estimation = e;
  });
}

int ctmsm_estimator_known(const char* name) {
  return name && ctmsm::parse_estimator(name).has_value() ? 1 : 0;
}

size_t ctmsm_estimator_count(void) { return ctmsm::kAllEstimators.size(); }

const char* ctmsm_estimator_name(size_t index) {
  if (index >= ctmsm::kAllEstimators.size()) return nullptr;
  return ctmsm::to_string(ctmsm::kAllEstimators[index]);
}

ctmsm_status ctmsm_simulate(const ctmsm_config* c, ctmsm_world world, int n, uint64_t seed, int threads,
                            ctmsm_dataset** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    const auto sc = ctmsm::effective_scenario(c->value);
    const auto w = world == CTMSM_WORLD_EXPERIMENTAL ? ctmsm::World::Experimental : ctmsm::World::Observational;
    auto* ds = new ctmsm_dataset;
    try {
      ds->value.subjects = ctmsm::simulate_dataset(sc, w, n > 0 ? n : sc.n, seed, 0, threads);
    } catch (...) {
      delete ds;
      throw;
    }
    ds->value.t_R = sc.t_R;
    ds->value.world = w == ctmsm::World::Experimental ? "experimental" : "observational";
    *out = ds;
  });
}

ctmsm_status ctmsm_dataset_read(const char* path, double t_R, ctmsm_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::optional<double> horizon;
    if (t_R > 0.0) horizon = t_R;
    *out = new ctmsm_dataset{ctmsm::read_dataset(path, horizon)};
  });
}

ctmsm_status ctmsm_dataset_write(const ctmsm_dataset* d, const char* path) {
  return guarded([&] {
    need(d, "data");
    need(path, "path");
    ctmsm::write_dataset(path, d->value.subjects, d->value.t_R, d->value.world);
  });
}

size_t ctmsm_dataset_size(const ctmsm_dataset* d) { return d ? d->value.subjects.size() : 0; }

double ctmsm_dataset_t_R(const ctmsm_dataset* d) { return d && d->value.t_R ? *d->value.t_R : 0.0; }

void ctmsm_dataset_free(ctmsm_dataset* d) { delete d; }

ctmsm_status ctmsm_validate_file(const char* path, double t_R, char** report) {
  return guarded([&] {
    need(path, "path");
    need(report, "report");
    *report = nullptr;
    auto ds = ctmsm::dataset_from_jsonl(ctmsm::read_text(path));
    if (t_R > 0.0) ds.t_R = t_R;
    if (!ds.t_R) {
      double m = 0.0;
      for (const auto& t : ds.subjects) m = std::max(m, t.t_max);
      ds.t_R = m;
    }
    const auto issues = ctmsm::validate_dataset(ds.subjects, *ds.t_R);
    nlohmann::json j = {{"path", path},
                        {"subjects", ds.subjects.size()},
                        {"t_R", *ds.t_R},
                        {"valid", issues.empty() && !ds.subjects.empty()},
                        {"violations", issues}};
    *report = dup_string(j.dump(2) + "\n");
    if (ds.subjects.empty()) ctmsm::fail(ctmsm::ErrorKind::Validation, std::string(path) + ": no subject records");
    if (!issues.empty()) {
      ctmsm::fail(ctmsm::ErrorKind::Validation,
                  std::string(path) + ": " + std::to_string(issues.size()) + " violation(s), first: " + issues.front());
    }
  });
}

ctmsm_status ctmsm_fit(const ctmsm_dataset* d, const char* estimator, const ctmsm_config* c, uint64_t seed,
                       int threads, ctmsm_estimate* out, char** json_out) {
  return guarded([&] {
    need(d, "data");
    need(estimator, "estimator");
    const auto kind = ctmsm::parse_estimator(estimator);
    if (!kind) ctmsm::fail(ctmsm::ErrorKind::Domain, std::string("unknown estimator \"") + estimator + "\"");
    ctmsm::EstimatorConfig ec = c ? c->value.estimation : ctmsm::EstimatorConfig{};
    ec.seed = seed;
    ec.threads = threads;
    const auto est = ctmsm::run_estimator(*kind, d->value.subjects, ec);
    const auto pt = ctmsm::as_array(est.point);
    if (out) {
      for (int p = 0; p < 4; ++p) {
        out->point[p] = pt[p];
        out->sd[p] = est.sd[p];
        out->lo95[p] = est.interval_95[p].lo;
        out->hi95[p] = est.interval_95[p].hi;
      }
      out->replicates = static_cast<int>(est.replicate_points.size());
      out->failures = est.failures;
      out->max_weight = std::max(est.max_weight, est.max_replicate_weight);
    }
    if (json_out) {
      nlohmann::json j;
      j["estimator"] = ctmsm::to_string(*kind);
      j["subjects"] = d->value.subjects.size();
      j["seed"] = seed;
      j["point"] = params_json(pt);
      j["sd"] = params_json(est.sd);
      j["interval_95"] = {{"eta1", {est.interval_95[0].lo, est.interval_95[0].hi}},
                          {"eta2", {est.interval_95[1].lo, est.interval_95[1].hi}},
                          {"eta3", {est.interval_95[2].lo, est.interval_95[2].hi}},
                          {"sigma", {est.interval_95[3].lo, est.interval_95[3].hi}}};
      if (est.full_data_fit) j["full_data_fit"] = params_json(ctmsm::as_array(*est.full_data_fit));
      j["replicates"] = est.replicate_points.size();
      j["failures"] = est.failures;
      j["max_weight"] = std::max(est.max_weight, est.max_replicate_weight);
      if (!est.diagnostics.blocks.empty()) {
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& b : est.diagnostics.blocks) {
          blocks.push_back({{"block", b.name},
                            {"acceptance_rate", b.acceptance_rate},
                            {"burnin_acceptance_rate", b.burnin_acceptance_rate},
                            {"final_scale", b.final_scale},
                            {"proposals", b.proposals}});
        }
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& s : est.diagnostics.coordinates) {
          coords.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"ess", s.ess}});
        }
        j["sampler"] = {{"blocks", blocks}, {"coordinates", coords}};
      }
      *json_out = dup_string(j.dump(2) + "\n");
    }
  });
}

ctmsm_status ctmsm_true_eta(const ctmsm_config* c, int m, uint64_t seed, int threads, double out[4]) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    const auto sc = ctmsm::effective_scenario(c->value);
    const auto p = ctmsm::true_eta(sc.exp_params, sc, m, seed, threads, c->value.estimation.msm);
    const auto a = ctmsm::as_array(p);
    for (int k = 0; k < 4; ++k) out[k] = a[k];
  });
}

ctmsm_status ctmsm_study(const ctmsm_config* c, const char* out_dir, int threads, ctmsm_log_fn log, void* user,
                         char** csv_out) {
  return guarded([&] {
    need(c, "config");
    need(out_dir, "out_dir");
    ctmsm::StudyLogger logger;
    if (log) logger = [log, user](const std::string& m) { log(m.c_str(), user); };
    const auto res = ctmsm::run_study(c->value, threads, logger);
    ctmsm::write_study_outputs(res, c->value, out_dir);
    if (csv_out) *csv_out = dup_string(ctmsm::metrics_csv(res));
  });
}

}  // extern "C"
