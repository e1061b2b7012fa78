#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace ctmsm {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, rejecting keys that are never read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::Config, path_ + ": expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorKind::Config, path_ + "." + it.key() + ": unknown key");
    }
  }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string where(const std::string& key) const { return path_ + "." + key; }

  void num(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number()) fail(ErrorKind::Config, where(key) + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(ErrorKind::Config, where(key) + ": must be finite");
  }
  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(ErrorKind::Config, where(key) + ": expected an integer");
    out = v.get<int>();
  }
  void seed(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (v.is_number_unsigned()) {
      out = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      out = static_cast<std::uint64_t>(v.get<std::int64_t>());
    } else {
      fail(ErrorKind::Config, where(key) + ": expected a non-negative integer");
    }
  }
  void text(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_string()) fail(ErrorKind::Config, where(key) + ": expected a string");
    out = v.get<std::string>();
  }
  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_boolean()) fail(ErrorKind::Config, where(key) + ": expected true or false");
    out = v.get<bool>();
  }
  void vec(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_array()) fail(ErrorKind::Config, where(key) + ": expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(ErrorKind::Config, where(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_scenario(const json& j, ScenarioConfig& s) {
  Section sec(j, "scenario");
  sec.integer("n", s.n);
  sec.num("t_R", s.t_R);
  sec.num("dt", s.dt);
  sec.num("delta_L", s.delta_L);
  sec.integer("p_Z", s.p_Z);
  sec.seed("seed", s.seed);
  auto& th = s.obs_params;
  auto& al = s.exp_params;
  if (sec.has("theta_A1")) {
    Section b(sec.at("theta_A1"), "scenario.theta_A1");
    b.num("a1_0", th.rate.intercept);
    b.num("a1_L", th.rate.covariate);
    b.vec("a1_Z", th.rate.baseline);
    b.num("a1_a", th.rate.dose);
    b.num("delta_rate", th.rate.confounder);
  }
  if (sec.has("theta_A2")) {
    Section b(sec.at("theta_A2"), "scenario.theta_A2");
    b.num("a2_0", th.mark.intercept);
    b.num("a2_L", th.mark.covariate);
    b.vec("a2_Z", th.mark.baseline);
    b.num("a2_a", th.mark.dose);
    b.num("delta_mark", th.mark.confounder);
    b.num("sigma_A", th.mark.sigma);
  }
  if (sec.has("theta_Tmax")) {
    Section b(sec.at("theta_Tmax"), "scenario.theta_Tmax");
    b.num("tm_0", th.termination.intercept);
    b.num("tm_t", th.termination.time);
    b.num("tm_L", th.termination.covariate);
    b.vec("tm_Z", th.termination.baseline);
    b.num("tm_a", th.termination.dose);
  }
  if (sec.has("theta_L")) {
    Section b(sec.at("theta_L"), "scenario.theta_L");
    b.num("l_0", th.covariate.intercept);
    b.num("l_lag", th.covariate.lag);
    b.num("l_a", th.covariate.dose);
    b.vec("l_Z", th.covariate.baseline);
    b.num("sigma_L", th.covariate.sigma);
  }
  sec.num("theta_U", th.confounder_prob);
  if (sec.has("theta_Y")) {
    Section b(sec.at("theta_Y"), "scenario.theta_Y");
    b.num("c_0", th.outcome.intercept);
    b.num("c_dose", th.outcome.dose);
    b.num("c_kernel", th.outcome.kernel);
    b.num("c_L", th.outcome.covariate);
    b.vec("c_Z", th.outcome.baseline);
    b.num("c_U", th.outcome.confounder);
    b.num("sigma_Y", th.outcome.sigma);
  }
  if (sec.has("alpha_A1")) {
    Section b(sec.at("alpha_A1"), "scenario.alpha_A1");
    b.num("e1_0", al.rate.intercept);
    b.num("e1_a", al.rate.dose);
  }
  if (sec.has("alpha_A2")) {
    Section b(sec.at("alpha_A2"), "scenario.alpha_A2");
    b.num("e2_0", al.mark.intercept);
    b.num("e2_a", al.mark.dose);
    b.num("sigma_AE", al.mark.sigma);
  }
  if (sec.has("alpha_Tmax")) {
    Section b(sec.at("alpha_Tmax"), "scenario.alpha_Tmax");
    b.num("et_0", al.termination.intercept);
    b.num("et_t", al.termination.time);
    b.num("et_a", al.termination.dose);
  }
}

UPolicy parse_policy(const std::string& s) {
  if (s == "imputed") return UPolicy::Imputed;
  if (s == "marginalized") return UPolicy::Marginalized;
  fail(ErrorKind::Config, "estimation.bct.u_policy: expected \"imputed\" or \"marginalized\"");
}

void read_estimation(const json& j, EstimatorConfig& e) {
  Section sec(j, "estimation");
  sec.num("trunc_percentile", e.trunc_percentile);
  sec.num("max_failure_fraction", e.max_failure_fraction);
  sec.num("eta3_max", e.msm.eta3_max);
  sec.integer("replicate_count", e.replicate_count);
  if (sec.has("bct")) {
    Section b(sec.at("bct"), "estimation.bct");
    std::string policy = to_string(e.bct.u_policy);
    b.text("u_policy", policy);
    e.bct.u_policy = parse_policy(policy);
    b.num("truncation", e.bct.truncation);
    b.integer("n_burnin", e.bct.sampler.n_burnin);
    b.integer("n_thin", e.bct.sampler.n_thin);
    b.integer("adapt_window", e.bct.sampler.adapt_window);
    b.boolean("adapt_covariance", e.bct.sampler.adapt_covariance);
    b.integer("em_iterations", e.bct.em_iterations);
    if (b.has("proposal_scale")) {
      const auto& ps = b.at("proposal_scale");
      if (!ps.is_object()) fail(ErrorKind::Config, "estimation.bct.proposal_scale: expected an object");
      for (auto it = ps.begin(); it != ps.end(); ++it) {
        if (!it.value().is_number()) fail(ErrorKind::Config, "estimation.bct.proposal_scale: expected numbers");
        e.bct.sampler.proposal_scale[it.key()] = it.value().get<double>();
      }
    }
  }
}

void read_study(const json& j, StudyConfig& c) {
  Section sec(j, "study");
  sec.text("label", c.label);
  if (sec.has("delta")) {
    double d = 0.0;
    sec.num("delta", d);
    c.delta = d;
  }
  sec.integer("replications", c.replications);
  if (sec.has("estimators")) {
    const auto& v = sec.at("estimators");
    if (!v.is_array()) fail(ErrorKind::Config, "study.estimators: expected an array of names");
    c.estimators.clear();
    for (const auto& e : v) {
      if (!e.is_string()) fail(ErrorKind::Config, "study.estimators: expected an array of names");
      auto k = parse_estimator(e.get<std::string>());
      if (!k) fail(ErrorKind::Config, "study.estimators: unknown estimator \"" + e.get<std::string>() + "\"");
      c.estimators.push_back(*k);
    }
  }
  sec.integer("true_eta_m", c.true_eta_m);
  sec.seed("master_seed", c.master_seed);
  sec.text("metrics_file", c.metrics_file);
  sec.text("summary_file", c.summary_file);
}

json vec_json(const std::vector<double>& v) { return json(v); }

}  // namespace

ScenarioConfig default_scenario() {
  ScenarioConfig s;
  s.n = 400;
  s.t_R = 10.0;
  s.dt = 0.01;
  s.delta_L = 0.5;
  s.p_Z = 2;
  auto& th = s.obs_params;
  th.rate = {std::log(0.4), 0.1, {0.1, -0.1}, -0.1, 0.0};
  th.mark = {1.0, 0.05, {0.05, 0.05}, 0.5, 0.0, 0.4};
  th.termination = {-6.0, 0.2, 0.2, {0.2, 0.0}, 0.1};
  th.covariate = {0.0, 0.5, 0.0, {0.3, 0.3}, 1.0};
  th.confounder_prob = 0.5;
  th.outcome = {1.0, 2.0, 2.0, 0.0, {0.0, 0.0}, 3.0, 1.0};
  // close to the observational marginal of the treatment process
  auto& al = s.exp_params;
  al.rate = {-0.85, 0.0};
  al.mark = {1.1, 0.55, 0.45};
  al.termination = {-6.0, 0.15, 0.3};
  return s;
}

StudyConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("configuration is not valid JSON: ") + e.what());
  }
  StudyConfig c;
  c.scenario = default_scenario();
  c.estimators.assign(kAllEstimators.begin(), kAllEstimators.end());
  {
    Section root(j, "config");
    if (root.has("scenario")) read_scenario(root.at("scenario"), c.scenario);
    if (root.has("study")) read_study(root.at("study"), c);
    if (root.has("estimation")) read_estimation(root.at("estimation"), c.estimation);
  }
  require(c.replications >= 1, ErrorKind::Config, "study.replications must be >= 1");
  require(!c.estimators.empty(), ErrorKind::Config, "study.estimators must not be empty");
  require(c.true_eta_m >= 1000, ErrorKind::Config, "study.true_eta_m must be >= 1000");
  const auto issues = validate(effective_scenario(c));
  if (!issues.empty()) {
    std::string msg = "scenario is invalid:";
    for (const auto& m : issues) msg += " " + m + ";";
    fail(ErrorKind::Config, msg);
  }
  validate(c.estimation);
  return c;
}

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open configuration file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ScenarioConfig effective_scenario(const StudyConfig& c) {
  ScenarioConfig s = c.scenario;
  if (c.delta) s.obs_params = with_confounding(s.obs_params, *c.delta);
  return s;
}

std::string to_json(const StudyConfig& c) {
  const auto& s = c.scenario;
  const auto& th = s.obs_params;
  const auto& al = s.exp_params;
  json sc = {
      {"n", s.n}, {"t_R", s.t_R}, {"dt", s.dt}, {"delta_L", s.delta_L}, {"p_Z", s.p_Z}, {"seed", s.seed},
      {"theta_A1",
       {{"a1_0", th.rate.intercept}, {"a1_L", th.rate.covariate}, {"a1_Z", vec_json(th.rate.baseline)},
        {"a1_a", th.rate.dose}, {"delta_rate", th.rate.confounder}}},
      {"theta_A2",
       {{"a2_0", th.mark.intercept}, {"a2_L", th.mark.covariate}, {"a2_Z", vec_json(th.mark.baseline)},
        {"a2_a", th.mark.dose}, {"delta_mark", th.mark.confounder}, {"sigma_A", th.mark.sigma}}},
      {"theta_Tmax",
       {{"tm_0", th.termination.intercept}, {"tm_t", th.termination.time}, {"tm_L", th.termination.covariate},
        {"tm_Z", vec_json(th.termination.baseline)}, {"tm_a", th.termination.dose}}},
      {"theta_L",
       {{"l_0", th.covariate.intercept}, {"l_lag", th.covariate.lag}, {"l_a", th.covariate.dose},
        {"l_Z", vec_json(th.covariate.baseline)}, {"sigma_L", th.covariate.sigma}}},
      {"theta_U", th.confounder_prob},
      {"theta_Y",
       {{"c_0", th.outcome.intercept}, {"c_dose", th.outcome.dose}, {"c_kernel", th.outcome.kernel},
        {"c_L", th.outcome.covariate}, {"c_Z", vec_json(th.outcome.baseline)}, {"c_U", th.outcome.confounder},
        {"sigma_Y", th.outcome.sigma}}},
      {"alpha_A1", {{"e1_0", al.rate.intercept}, {"e1_a", al.rate.dose}}},
      {"alpha_A2", {{"e2_0", al.mark.intercept}, {"e2_a", al.mark.dose}, {"sigma_AE", al.mark.sigma}}},
      {"alpha_Tmax", {{"et_0", al.termination.intercept}, {"et_t", al.termination.time}, {"et_a", al.termination.dose}}},
  };
  json names = json::array();
  for (auto k : c.estimators) names.push_back(to_string(k));
  json st = {{"label", c.label},
             {"replications", c.replications},
             {"estimators", names},
             {"true_eta_m", c.true_eta_m},
             {"master_seed", c.master_seed},
             {"metrics_file", c.metrics_file},
             {"summary_file", c.summary_file}};
  if (c.delta) st["delta"] = *c.delta;
  const auto& e = c.estimation;
  json ps = json::object();
  for (const auto& [k, v] : e.bct.sampler.proposal_scale) ps[k] = v;
  json est = {{"trunc_percentile", e.trunc_percentile},
              {"max_failure_fraction", e.max_failure_fraction},
              {"eta3_max", e.msm.eta3_max},
              {"replicate_count", e.replicate_count},
              {"bct",
               {{"u_policy", to_string(e.bct.u_policy)},
                {"truncation", e.bct.truncation},
                {"n_burnin", e.bct.sampler.n_burnin},
                {"n_thin", e.bct.sampler.n_thin},
                {"adapt_window", e.bct.sampler.adapt_window},
                {"adapt_covariance", e.bct.sampler.adapt_covariance},
                {"em_iterations", e.bct.em_iterations},
                {"proposal_scale", ps}}}};
  json root = {{"scenario", sc}, {"study", st}, {"estimation", est}};
  return root.dump(2) + "\n";
}

}  // namespace ctmsm
