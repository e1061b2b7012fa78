#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "ctmsm/ctmsm.h"

namespace {

struct Config {
  ctmsm_config* p = nullptr;
  ~Config() { ctmsm_config_free(p); }
};

struct Data {
  ctmsm_dataset* p = nullptr;
  ~Data() { ctmsm_dataset_free(p); }
};

struct Text {
  char* p = nullptr;
  ~Text() { ctmsm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(ctmsm_version()).size() > 0);
  CHECK(std::string(ctmsm_status_name(CTMSM_OK)) == "ok");
  CHECK(std::string(ctmsm_status_name(CTMSM_ERR_VALIDATION)).size() > 0);
}

TEST_CASE("estimator registry") {
  CHECK(ctmsm_estimator_count() == 5);
  for (size_t i = 0; i < ctmsm_estimator_count(); ++i) CHECK(ctmsm_estimator_known(ctmsm_estimator_name(i)) == 1);
  CHECK(ctmsm_estimator_known("Magic") == 0);
  CHECK(ctmsm_estimator_known(nullptr) == 0);
  CHECK(ctmsm_estimator_name(99) == nullptr);
}

TEST_CASE("configuration handles") {
  Config c;
  REQUIRE(ctmsm_config_default(&c.p) == CTMSM_OK);
  Text json;
  REQUIRE(ctmsm_config_to_json(c.p, &json.p) == CTMSM_OK);
  CHECK(json.str().find("\"scenario\"") != std::string::npos);
  Config back;
  CHECK(ctmsm_config_parse(json.p, &back.p) == CTMSM_OK);
  CHECK(ctmsm_config_set_replicate_count(c.p, 1) == CTMSM_ERR_CONFIG);
  CHECK(ctmsm_config_set_replicate_count(c.p, 30) == CTMSM_OK);
  CHECK(ctmsm_config_set_master_seed(c.p, 5) == CTMSM_OK);

  Config bad;
  CHECK(ctmsm_config_parse("{\"scenario\": {\"bogus\": 1}}", &bad.p) == CTMSM_ERR_CONFIG);
  CHECK(bad.p == nullptr);
  CHECK(ctmsm_last_status() == CTMSM_ERR_CONFIG);
  CHECK(std::string(ctmsm_last_error()).find("bogus") != std::string::npos);
  CHECK(ctmsm_config_load("/nonexistent/config.json", &bad.p) == CTMSM_ERR_IO);
  CHECK(ctmsm_config_default(nullptr) == CTMSM_ERR_ARGUMENT);
}

TEST_CASE("simulate, write, read, validate and fit") {
  Config c;
  REQUIRE(ctmsm_config_default(&c.p) == CTMSM_OK);
  Data d;
  REQUIRE(ctmsm_simulate(c.p, CTMSM_WORLD_OBSERVATIONAL, 300, 11, 1, &d.p) == CTMSM_OK);
  CHECK(ctmsm_dataset_size(d.p) == 300);
  CHECK(ctmsm_dataset_t_R(d.p) == 10.0);
  const char* path = "capi_dataset.jsonl";
  REQUIRE(ctmsm_dataset_write(d.p, path) == CTMSM_OK);
  Data r;
  REQUIRE(ctmsm_dataset_read(path, 0.0, &r.p) == CTMSM_OK);
  CHECK(ctmsm_dataset_size(r.p) == 300);
  Text report;
  CHECK(ctmsm_validate_file(path, 0.0, &report.p) == CTMSM_OK);
  CHECK(report.str().find("\"valid\": true") != std::string::npos);
  Text report2;
  CHECK(ctmsm_validate_file(path, 5.0, &report2.p) == CTMSM_ERR_VALIDATION);
  CHECK(report2.str().find("\"valid\": false") != std::string::npos);

  REQUIRE(ctmsm_config_set_replicate_count(c.p, 20) == CTMSM_OK);
  ctmsm_estimate est{};
  Text fit_json;
  REQUIRE(ctmsm_fit(r.p, "Naive", c.p, 3, 1, &est, &fit_json.p) == CTMSM_OK);
  CHECK(est.replicates + est.failures == 20);
  CHECK(std::isfinite(est.point[1]));
  CHECK(est.lo95[1] < est.hi95[1]);
  CHECK(est.sd[1] > 0.0);
  CHECK(fit_json.str().find("\"estimator\"") != std::string::npos);
  ctmsm_estimate again{};
  REQUIRE(ctmsm_fit(r.p, "Naive", c.p, 3, 1, &again, nullptr) == CTMSM_OK);
  CHECK(again.point[1] == est.point[1]);
  CHECK(ctmsm_fit(r.p, "Magic", c.p, 3, 1, &est, nullptr) == CTMSM_ERR_ARGUMENT);
  CHECK(ctmsm_fit(nullptr, "Naive", c.p, 3, 1, &est, nullptr) == CTMSM_ERR_ARGUMENT);
  std::remove(path);
}

TEST_CASE("reading problems map to their status") {
  Data d;
  CHECK(ctmsm_dataset_read("/nonexistent/file.jsonl", 0.0, &d.p) == CTMSM_ERR_IO);
  std::FILE* f = std::fopen("capi_broken.jsonl", "w");
  REQUIRE(f);
  std::fputs("{\"id\": 1,\n", f);
  std::fclose(f);
  CHECK(ctmsm_dataset_read("capi_broken.jsonl", 0.0, &d.p) == CTMSM_ERR_PARSE);
  CHECK(std::string(ctmsm_last_error()).find("line 1") != std::string::npos);
  std::remove("capi_broken.jsonl");
}

TEST_CASE("true_eta through the library") {
  Config c;
  REQUIRE(ctmsm_config_default(&c.p) == CTMSM_OK);
  double eta[4];
  REQUIRE(ctmsm_true_eta(c.p, 2000, 1, 1, eta) == CTMSM_OK);
  CHECK(eta[3] > 0.0);
  CHECK(ctmsm_true_eta(c.p, 10, 1, 1, eta) == CTMSM_ERR_CONFIG);
}
