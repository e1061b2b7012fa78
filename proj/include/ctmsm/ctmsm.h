#ifndef CTMSM_CTMSM_H
#define CTMSM_CTMSM_H

#include <stddef.h>
#include <stdint.h>

#if defined(CTMSM_BUILDING_LIBRARY)
#define CTMSM_API __attribute__((visibility("default")))
#else
#define CTMSM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ctmsm_status {
  CTMSM_OK = 0,
  CTMSM_ERR_ARGUMENT = 1,    /* null pointer, unknown name, value out of range */
  CTMSM_ERR_CONFIG = 2,      /* inconsistent configuration */
  CTMSM_ERR_PARAMETER = 3,   /* model parameter outside its support */
  CTMSM_ERR_INPUT = 4,       /* data unusable for the requested operation */
  CTMSM_ERR_PARSE = 5,       /* malformed file content */
  CTMSM_ERR_VALIDATION = 6,  /* data invariant violated */
  CTMSM_ERR_IO = 7,
  CTMSM_ERR_NUMERICAL = 8,   /* degenerate fit, non-convergence, non-finite likelihood */
  CTMSM_ERR_DIAGNOSTICS = 9, /* sampler health check failed */
  CTMSM_ERR_ESTIMATOR = 10,  /* too many failed replicates or replications */
  CTMSM_ERR_INTERNAL = 11
} ctmsm_status;

typedef enum ctmsm_world { CTMSM_WORLD_OBSERVATIONAL = 0, CTMSM_WORLD_EXPERIMENTAL = 1 } ctmsm_world;

typedef struct ctmsm_config ctmsm_config;
typedef struct ctmsm_dataset ctmsm_dataset;

/* Parameter order in every array: eta1, eta2, eta3, sigma. */
typedef struct ctmsm_estimate {
  double point[4];
  double sd[4];
  double lo95[4];
  double hi95[4];
  int replicates;
  int failures;
  double max_weight;
} ctmsm_estimate;

typedef void (*ctmsm_log_fn)(const char* message, void* user);

CTMSM_API const char* ctmsm_version(void);

/* Message and kind of the last failure on the calling thread. */
CTMSM_API const char* ctmsm_last_error(void);
CTMSM_API ctmsm_status ctmsm_last_status(void);
CTMSM_API const char* ctmsm_status_name(ctmsm_status status);

/* Strings returned through char** are owned by the caller. */
CTMSM_API void ctmsm_string_free(char* s);

/* Configuration. */
CTMSM_API ctmsm_status ctmsm_config_default(ctmsm_config** out);
CTMSM_API ctmsm_status ctmsm_config_parse(const char* json_text, ctmsm_config** out);
CTMSM_API ctmsm_status ctmsm_config_load(const char* path, ctmsm_config** out);
CTMSM_API void ctmsm_config_free(ctmsm_config* config);
CTMSM_API ctmsm_status ctmsm_config_to_json(const ctmsm_config* config, char** out);
CTMSM_API ctmsm_status ctmsm_config_set_master_seed(ctmsm_config* config, uint64_t seed);
CTMSM_API ctmsm_status ctmsm_config_set_replicate_count(ctmsm_config* config, int count);

/* 1 when `name` is a known estimator, else 0. */
CTMSM_API int ctmsm_estimator_known(const char* name);
CTMSM_API size_t ctmsm_estimator_count(void);
CTMSM_API const char* ctmsm_estimator_name(size_t index);

/* Datasets. A positive t_R overrides the file header; t_R <= 0 uses the
   header, else the largest t_max. */
CTMSM_API ctmsm_status ctmsm_simulate(const ctmsm_config* config, ctmsm_world world, int n, uint64_t seed,
                                      int threads, ctmsm_dataset** out);
CTMSM_API ctmsm_status ctmsm_dataset_read(const char* path, double t_R, ctmsm_dataset** out);
CTMSM_API ctmsm_status ctmsm_dataset_write(const ctmsm_dataset* data, const char* path);
CTMSM_API size_t ctmsm_dataset_size(const ctmsm_dataset* data);
CTMSM_API double ctmsm_dataset_t_R(const ctmsm_dataset* data);
CTMSM_API void ctmsm_dataset_free(ctmsm_dataset* data);

/* Parses and validates a dataset file; a JSON report goes to *report. */
CTMSM_API ctmsm_status ctmsm_validate_file(const char* path, double t_R, char** report);

/* Runs one estimator. `config` supplies the estimation settings and may be
   null for defaults. `json_out` may be null. */
CTMSM_API ctmsm_status ctmsm_fit(const ctmsm_dataset* data, const char* estimator, const ctmsm_config* config,
                                 uint64_t seed, int threads, ctmsm_estimate* out, char** json_out);

/* MSM parameters of the experimental world of `config`, from m subjects. */
CTMSM_API ctmsm_status ctmsm_true_eta(const ctmsm_config* config, int m, uint64_t seed, int threads,
                                      double out[4]);

/* Runs the replication study and writes its CSV and JSON summary to
   `out_dir`. `csv_out` and `log` may be null. */
CTMSM_API ctmsm_status ctmsm_study(const ctmsm_config* config, const char* out_dir, int threads, ctmsm_log_fn log,
                                   void* log_user, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif
