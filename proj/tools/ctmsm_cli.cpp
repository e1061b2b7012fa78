#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctmsm/ctmsm.h"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

enum class LogLevel { Quiet, Error, Info, Debug, Json };

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  LogLevel level = LogLevel::Error;
};

Globals g;

int exit_code(ctmsm_status s) {
  switch (s) {
    case CTMSM_OK: return kOk;
    case CTMSM_ERR_ARGUMENT: return kUsage;
    case CTMSM_ERR_CONFIG:
    case CTMSM_ERR_PARAMETER:
    case CTMSM_ERR_INPUT:
    case CTMSM_ERR_PARSE:
    case CTMSM_ERR_VALIDATION:
    case CTMSM_ERR_IO: return kData;
    default: return kNumerical;
  }
}

int report(ctmsm_status s) {
  if (s == CTMSM_OK) return kOk;
  const int code = exit_code(s);
  if (g.level == LogLevel::Json) {
    nlohmann::json j = {{"error", ctmsm_status_name(s)}, {"exit_code", code}, {"message", ctmsm_last_error()}};
    std::cerr << j.dump() << "\n";
  } else if (g.level != LogLevel::Quiet) {
    std::cerr << "error (" << ctmsm_status_name(s) << "): " << ctmsm_last_error() << "\n";
  }
  return code;
}

void info(const std::string& msg) {
  if (g.level == LogLevel::Info || g.level == LogLevel::Debug) {
    std::cerr << msg << "\n";
  } else if (g.level == LogLevel::Json) {
    std::cerr << nlohmann::json({{"log", msg}}).dump() << "\n";
  }
}

void log_cb(const char* msg, void*) { info(msg); }

bool write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return true;
  }
  const std::filesystem::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) return false;
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  return std::fclose(f) == 0 && ok;
}

struct ConfigHandle {
  ctmsm_config* p = nullptr;
  ~ConfigHandle() { ctmsm_config_free(p); }
};

struct DatasetHandle {
  ctmsm_dataset* p = nullptr;
  ~DatasetHandle() { ctmsm_dataset_free(p); }
};

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { ctmsm_string_free(p); }
};

ctmsm_status load_config(const std::string& path, ConfigHandle& h) {
  if (path.empty()) return ctmsm_config_default(&h.p);
  return ctmsm_config_load(path.c_str(), &h.p);
}

std::uint64_t config_seed(const ConfigHandle& h) {
  OwnedString s;
  if (ctmsm_config_to_json(h.p, &s.p) != CTMSM_OK) return 1;
  const auto j = nlohmann::json::parse(s.p);
  return j["study"]["master_seed"].get<std::uint64_t>();
}

std::uint64_t scenario_seed(const ConfigHandle& h) {
  OwnedString s;
  if (ctmsm_config_to_json(h.p, &s.p) != CTMSM_OK) return 1;
  const auto j = nlohmann::json::parse(s.p);
  return j["scenario"]["seed"].get<std::uint64_t>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time marginal structural models: simulation, estimation and replication studies"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(ctmsm_version()));

  std::uint64_t seed = 0;
  std::string level = "error";
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the configuration)");
  app.add_option("--threads", g.threads, "Worker threads (default: $CTMSM_THREADS, else 1)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--log-level", level, "quiet, error, info, debug or json")
      ->check(CLI::IsMember({"quiet", "error", "info", "debug", "json"}));

  std::vector<std::string> names;
  for (std::size_t k = 0; k < ctmsm_estimator_count(); ++k) names.emplace_back(ctmsm_estimator_name(k));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a dataset from a scenario");
  std::string sim_config, sim_world = "jo", sim_out;
  int sim_n = 0;
  sim->add_option("--config", sim_config, "Configuration file (defaults when omitted)")->check(CLI::ExistingFile);
  sim->add_option("--world", sim_world, "jo (observational) or je (experimental)")
      ->check(CLI::IsMember({"jo", "je"}));
  sim->add_option("--n", sim_n, "Subjects (default: scenario n)")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "Output JSONL file")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Run one estimator on a dataset");
  std::string fit_data, fit_est, fit_out, fit_config;
  int fit_reps = 0;
  double fit_tr = 0.0;
  fit->add_option("--data", fit_data, "Dataset JSONL file")->required()->check(CLI::ExistingFile);
  fit->add_option("--estimator", fit_est, "Estimator name")->required()->check(CLI::IsMember(names));
  fit->add_option("--out", fit_out, "Output JSON file (stdout when omitted)");
  fit->add_option("--config", fit_config, "Configuration with estimation settings")->check(CLI::ExistingFile);
  fit->add_option("--replicates", fit_reps, "Bootstrap or posterior replicates")->check(CLI::Range(2, 1000000));
  fit->add_option("--t-R", fit_tr, "Study horizon (overrides the file header)")->check(CLI::PositiveNumber);

  // true-eta
  auto* te = app.add_subcommand("true-eta", "MSM parameters of the experimental world");
  std::string te_config, te_out;
  int te_m = 50000;
  te->add_option("--config", te_config, "Configuration file")->check(CLI::ExistingFile);
  te->add_option("--m", te_m, "Simulated subjects")->check(CLI::Range(1000, 100000000));
  te->add_option("--out", te_out, "Output JSON file (stdout when omitted)");

  // study
  auto* st = app.add_subcommand("study", "Run a replication study");
  std::string st_config, st_dir;
  st->add_option("--config", st_config, "Study configuration file")->required()->check(CLI::ExistingFile);
  st->add_option("--out-dir", st_dir, "Output directory")->required();

  // validate
  auto* va = app.add_subcommand("validate", "Check a dataset file");
  std::string va_data;
  double va_tr = 0.0;
  va->add_option("--data", va_data, "Dataset JSONL file")->required()->check(CLI::ExistingFile);
  va->add_option("--t-R", va_tr, "Study horizon (overrides the file header)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (level == "quiet") g.level = LogLevel::Quiet;
  if (level == "info") g.level = LogLevel::Info;
  if (level == "debug") g.level = LogLevel::Debug;
  if (level == "json") g.level = LogLevel::Json;
  if (*seed_opt) g.seed = seed;

  if (*sim) {
    ConfigHandle cfg;
    if (auto s = load_config(sim_config, cfg); s != CTMSM_OK) return report(s);
    const auto world = sim_world == "je" ? CTMSM_WORLD_EXPERIMENTAL : CTMSM_WORLD_OBSERVATIONAL;
    DatasetHandle ds;
    if (auto s = ctmsm_simulate(cfg.p, world, sim_n, g.seed.value_or(scenario_seed(cfg)), g.threads, &ds.p);
        s != CTMSM_OK) {
      return report(s);
    }
    if (auto s = ctmsm_dataset_write(ds.p, sim_out.c_str()); s != CTMSM_OK) return report(s);
    info("wrote " + std::to_string(ctmsm_dataset_size(ds.p)) + " subjects to " + sim_out);
    return kOk;
  }

  if (*fit) {
    ConfigHandle cfg;
    if (auto s = load_config(fit_config, cfg); s != CTMSM_OK) return report(s);
    if (fit_reps > 0) {
      if (auto s = ctmsm_config_set_replicate_count(cfg.p, fit_reps); s != CTMSM_OK) return report(s);
    }
    DatasetHandle ds;
    if (auto s = ctmsm_dataset_read(fit_data.c_str(), fit_tr, &ds.p); s != CTMSM_OK) return report(s);
    info("fitting " + fit_est + " on " + std::to_string(ctmsm_dataset_size(ds.p)) + " subjects");
    OwnedString out;
    if (auto s = ctmsm_fit(ds.p, fit_est.c_str(), cfg.p, g.seed.value_or(1), g.threads, nullptr, &out.p);
        s != CTMSM_OK) {
      return report(s);
    }
    if (!write_text(fit_out, out.p)) {
      std::cerr << "error (io): cannot write " << fit_out << "\n";
      return kData;
    }
    return kOk;
  }

  if (*te) {
    ConfigHandle cfg;
    if (auto s = load_config(te_config, cfg); s != CTMSM_OK) return report(s);
    const std::uint64_t sd = g.seed.value_or(config_seed(cfg));
    double eta[4];
    info("simulating " + std::to_string(te_m) + " experimental-world subjects");
    if (auto s = ctmsm_true_eta(cfg.p, te_m, sd, g.threads, eta); s != CTMSM_OK) return report(s);
    nlohmann::json j = {{"m", te_m},
                        {"seed", sd},
                        {"eta1", eta[0]},
                        {"eta2", eta[1]},
                        {"eta3", eta[2]},
                        {"sigma", eta[3]}};
    if (!write_text(te_out, j.dump(2) + "\n")) {
      std::cerr << "error (io): cannot write " << te_out << "\n";
      return kData;
    }
    return kOk;
  }

  if (*st) {
    ConfigHandle cfg;
    if (auto s = load_config(st_config, cfg); s != CTMSM_OK) return report(s);
    if (g.seed) {
      if (auto s = ctmsm_config_set_master_seed(cfg.p, *g.seed); s != CTMSM_OK) return report(s);
    }
    OwnedString csv;
    if (auto s = ctmsm_study(cfg.p, st_dir.c_str(), g.threads, log_cb, nullptr, &csv.p); s != CTMSM_OK) {
      return report(s);
    }
    if (g.level != LogLevel::Quiet && g.level != LogLevel::Json) std::cout << csv.p;
    return kOk;
  }

  if (*va) {
    OwnedString rep;
    const auto s = ctmsm_validate_file(va_data.c_str(), va_tr, &rep.p);
    if (rep.p) std::cout << rep.p;
    return report(s);
  }
  return kUsage;
}
