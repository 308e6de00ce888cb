/* econdeepc.h - C interface to the economic DeePC toolkit.
 *
 * All functions return an edpc_status; on failure edpc_last_error() gives a
 * human-readable message for the calling thread. Objects are opaque handles
 * created and destroyed by the library.
 */
#ifndef ECONDEEPC_H
#define ECONDEEPC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EDPC_API __declspec(dllexport)
#else
#define EDPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum edpc_status {
  EDPC_OK = 0,
  EDPC_ERR_INVALID_ARGUMENT = 1,
  EDPC_ERR_IO = 2,
  EDPC_ERR_PARSE = 3,
  EDPC_ERR_NUMERIC = 4,
  EDPC_ERR_INTERNAL = 5
} edpc_status;

EDPC_API const char* edpc_version(void);

/* Message for the last failing call on this thread; empty string if none. */
EDPC_API const char* edpc_last_error(void);

/* --- experiment configuration ------------------------------------------- */

typedef struct edpc_config edpc_config;

EDPC_API edpc_status edpc_config_load(const char* path, edpc_config** out);
/* Dotted-key override, e.g. ("evaluation.n_seeds", "5"). */
EDPC_API edpc_status edpc_config_set(edpc_config* cfg, const char* key, const char* value);
EDPC_API void edpc_config_free(edpc_config* cfg);

/* --- pipeline ------------------------------------------------------------- */

typedef struct edpc_generate_report {
  int pe_ok;               /* persistent excitation at order L + n_x */
  long long pe_rank;       /* achieved rank */
  long long pe_required;   /* required rank */
  long long n_windows;
  long long n_train, n_val, n_test;
} edpc_generate_report;

EDPC_API edpc_status edpc_generate_data(const edpc_config* cfg, const char* out_dir,
                                        edpc_generate_report* report /* nullable */);

typedef struct edpc_train_report {
  int best_epoch;
  int diverged;
  double final_train_loss;
  double final_val_loss;
  double grad_check_max_rel_err; /* -1 when the check did not run */
} edpc_train_report;

EDPC_API edpc_status edpc_train(const edpc_config* cfg, const char* dataset_dir,
                                const char* model_path, int run_grad_check,
                                edpc_train_report* report /* nullable */);

typedef struct edpc_simulate_report {
  double mean_avg_profit;
  double std_avg_profit;
  int n_fallbacks;
  double total_solve_s;
} edpc_simulate_report;

/* mode: "econ" | "econ-reduced" | "tracking" | "constant". seeds may be NULL
 * (n_seeds 0) to use the config's evaluation seeds. reduced_rank < 0 selects
 * the tolerance-based rank in econ-reduced mode. */
EDPC_API edpc_status edpc_simulate(const edpc_config* cfg, const char* model_path,
                                   const char* dataset_dir, const char* mode,
                                   const char* out_dir, const uint64_t* seeds, int n_seeds,
                                   long long reduced_rank,
                                   edpc_simulate_report* report /* nullable */);

/* Writes summary.txt / summary.csv and plot series into out_dir; `table_out`
 * (when non-NULL) receives the grid rendered as text, truncated to
 * table_cap-1 characters. */
EDPC_API edpc_status edpc_evaluate(const char* const* result_paths, int n_paths,
                                   const char* out_dir, char* table_out, size_t table_cap);

/* --- trained models -------------------------------------------------------- */

typedef struct edpc_model edpc_model;

EDPC_API edpc_status edpc_model_load(const char* path, edpc_model** out);
EDPC_API void edpc_model_free(edpc_model* model);
EDPC_API edpc_status edpc_model_dims(const edpc_model* model, int* n_y, int* n_z, int* n_c);
/* Lift one physical output vector into the transformed space. */
EDPC_API edpc_status edpc_model_lift(const edpc_model* model, const double* y, int n_y,
                                     double* z_out, int n_z);
/* Surrogate stage cost of a transformed output, in physical cost units. */
EDPC_API edpc_status edpc_model_stage_cost(const edpc_model* model, const double* z, int n_z,
                                           double* cost_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ECONDEEPC_H */
