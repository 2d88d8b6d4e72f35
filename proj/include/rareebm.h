/* C interface to the rareebm rare-event estimation library.
 *
 * All functions return a rareebm_status. On failure a description of the last
 * error on the calling thread is available from rareebm_last_error(). Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with rareebm_string_free().
 */
#ifndef RAREEBM_H
#define RAREEBM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RAREEBM_BUILDING_LIBRARY)
#    define RAREEBM_API __declspec(dllexport)
#  else
#    define RAREEBM_API __declspec(dllimport)
#  endif
#else
#  define RAREEBM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rareebm_status {
  RAREEBM_OK = 0,
  RAREEBM_ERR_CONFIG = 2,    /* invalid configuration or arguments in a config */
  RAREEBM_ERR_NUMERIC = 3,   /* numerical failure during estimation */
  RAREEBM_ERR_IO = 4,        /* file could not be read or written */
  RAREEBM_ERR_ARGUMENT = 5,  /* null handle or invalid argument to the API */
  RAREEBM_ERR_INTERNAL = 6
} rareebm_status;

typedef struct rareebm_experiment rareebm_experiment;
typedef struct rareebm_result rareebm_result;
typedef struct rareebm_density rareebm_density;

RAREEBM_API const char* rareebm_version(void);
RAREEBM_API const char* rareebm_last_error(void);
RAREEBM_API void rareebm_string_free(char* s);

/* Experiments ------------------------------------------------------------ */

RAREEBM_API rareebm_status rareebm_experiment_from_file(const char* path, rareebm_experiment** out);
RAREEBM_API rareebm_status rareebm_experiment_from_json(const char* json, rareebm_experiment** out);
RAREEBM_API void rareebm_experiment_free(rareebm_experiment* e);

RAREEBM_API rareebm_status rareebm_experiment_set_seed(rareebm_experiment* e, uint64_t base_seed);
RAREEBM_API rareebm_status rareebm_experiment_set_out_dir(rareebm_experiment* e, const char* dir);
RAREEBM_API rareebm_status rareebm_experiment_set_jobs(rareebm_experiment* e, unsigned jobs);
RAREEBM_API rareebm_status rareebm_experiment_set_runs(rareebm_experiment* e, size_t n_runs);
RAREEBM_API rareebm_status rareebm_experiment_set_traces(rareebm_experiment* e, int enabled);
/* The configuration after defaults were applied. */
RAREEBM_API rareebm_status rareebm_experiment_config_json(const rareebm_experiment* e, char** out);

RAREEBM_API rareebm_status rareebm_experiment_run(const rareebm_experiment* e, rareebm_result** out);
RAREEBM_API void rareebm_result_free(rareebm_result* r);

RAREEBM_API rareebm_status rareebm_result_summary_json(const rareebm_result* r, char** out);
/* Number of replicates, including failed ones. */
RAREEBM_API rareebm_status rareebm_result_run_count(const rareebm_result* r, size_t* out);
/* Estimate and budget of one replicate; *ok is 0 for a failed replicate. */
RAREEBM_API rareebm_status rareebm_result_run(const rareebm_result* r, size_t index, double* p_hat, uint64_t* budget,
                                              int* ok);
/* Per-iteration trace of one replicate as CSV text. */
RAREEBM_API rareebm_status rareebm_result_trace_csv(const rareebm_result* r, size_t index, char** out);

/* Tables and oracles ----------------------------------------------------- */

/* Runs configs/<name>/table.json. config_dir and out_dir may be NULL for the
 * defaults; seed and runs are applied only when the has_ flags are non-zero. */
RAREEBM_API rareebm_status rareebm_replicate_table(const char* name, const char* config_dir, const char* out_dir,
                                                   unsigned jobs, int has_seed, uint64_t seed, int has_runs,
                                                   size_t runs, char** summary_json);

/* Reference answers for "contamination", "four_branch", "load_capacity" or
 * "normal_line". options_json may be NULL. */
RAREEBM_API rareebm_status rareebm_oracle_json(const char* problem, const char* options_json, char** out);

/* Reference densities ---------------------------------------------------- */

RAREEBM_API rareebm_status rareebm_density_gaussian(double mean, double sd, rareebm_density** out);
RAREEBM_API rareebm_status rareebm_density_gev(double location, double scale, double shape, rareebm_density** out);
RAREEBM_API void rareebm_density_free(rareebm_density* d);
RAREEBM_API rareebm_status rareebm_density_pdf(const rareebm_density* d, double r, double* out);
RAREEBM_API rareebm_status rareebm_density_score(const rareebm_density* d, double r, double* out);

/* Four-branch limit-state function. */
RAREEBM_API double rareebm_four_branch(double theta1, double theta2);

#ifdef __cplusplus
}
#endif

#endif /* RAREEBM_H */
