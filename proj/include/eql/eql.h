#ifndef EQL_EQL_H
#define EQL_EQL_H

/* C interface to the equation learner. All handles are opaque; every call
 * returns an eql_status and, on failure, leaves a message readable through
 * eql_last_error() on the calling thread. Strings returned through char**
 * are owned by the caller and released with eql_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(EQL_BUILDING_LIBRARY)
#define EQL_API __attribute__((visibility("default")))
#else
#define EQL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eql_status {
  EQL_OK = 0,
  EQL_ERR_INVALID_ARGUMENT = 1,
  EQL_ERR_DIMENSION_MISMATCH = 2,
  EQL_ERR_NON_FINITE = 3,
  EQL_ERR_DIVERGED = 4,
  EQL_ERR_IO = 5,
  EQL_ERR_PARSE = 6,
  EQL_ERR_EMPTY_PARTITION = 7,
  EQL_ERR_INTERNAL = 99
} eql_status;

typedef struct eql_dataset eql_dataset;
typedef struct eql_model eql_model;
typedef struct eql_sweep eql_sweep;

EQL_API const char* eql_last_error(void);
EQL_API const char* eql_status_string(eql_status status);
EQL_API const char* eql_version(void);
EQL_API void eql_string_free(char* s);

/* JSON array of benchmark names. */
EQL_API eql_status eql_benchmark_names(char** out_json);
/* {name, n, m, h, tests: [...]}; h <= 0 picks the default width. */
EQL_API eql_status eql_benchmark_info_json(const char* benchmark, double h, char** out_json);

/* split is "train" or one of the benchmark's test sets ("interp", "near",
 * "far"); sigma is ignored for test sets, h <= 0 picks the default width.
 * seed is the data seed: test sets derive theirs with a fixed per-split
 * offset, so they never repeat the training draw. */
EQL_API eql_status eql_dataset_generate(const char* benchmark, const char* split, int count, double sigma,
                                        uint64_t seed, double h, eql_dataset** out);
/* x is rows*n, y is rows*m, both row-major. */
EQL_API eql_status eql_dataset_create(int64_t rows, int n, int m, const double* x, const double* y,
                                      eql_dataset** out);
/* meta may be NULL: the sidecar next to the CSV is used if present. */
EQL_API eql_status eql_dataset_load_csv(const char* csv_path, const char* meta_path, eql_dataset** out);
EQL_API eql_status eql_dataset_save_csv(const eql_dataset* data, const char* csv_path, const char* meta_path);
EQL_API eql_status eql_dataset_shape(const eql_dataset* data, int64_t* rows, int* n, int* m);
EQL_API eql_status eql_dataset_copy(const eql_dataset* data, double* x, double* y);
/* {name, n, m, rows, sigma, domain} */
EQL_API eql_status eql_dataset_info_json(const eql_dataset* data, char** out_json);
EQL_API eql_status eql_dataset_split(const eql_dataset* data, double fraction, uint64_t seed, eql_dataset** first,
                                     eql_dataset** second);
EQL_API eql_status eql_dataset_load_xray(const char* path, eql_dataset** known, eql_dataset** extrapolation);
EQL_API void eql_dataset_free(eql_dataset* data);

/* network_json: {"kind": "eql"|"mlp", "layers": L, "u", "v", "width",
 * "menu": ["id", "sin", ...]}; config_json holds training settings
 * (lambda, epochs, batch_size, alpha, t1_frac, t2_frac, clamp_threshold,
 * seed). Either may be NULL or "{}" for defaults. */
EQL_API eql_status eql_train(const eql_dataset* train, const char* network_json, const char* config_json,
                             eql_model** out);
EQL_API eql_status eql_model_load(const char* path, eql_model** out);
/* metrics_json may be NULL. */
EQL_API eql_status eql_model_save(const eql_model* model, const char* path, const char* metrics_json);
EQL_API eql_status eql_model_dims(const eql_model* model, int* n, int* m);
EQL_API eql_status eql_model_rms(const eql_model* model, const eql_dataset* data, double* out);
EQL_API eql_status eql_model_predict(const eql_model* model, int64_t rows, const double* x, double* y);
EQL_API eql_status eql_model_sparsity(const eql_model* model, int* out);
/* One "yi = ..." line per output, after pruning and simplification. */
EQL_API eql_status eql_model_formula(const eql_model* model, double prune_threshold, int precision, char** out);
/* JSON array with one expression tree per output. */
EQL_API eql_status eql_model_expression_json(const eql_model* model, double prune_threshold, int simplified,
                                             char** out);
EQL_API eql_status eql_model_save_history(const eql_model* model, const char* csv_path);
EQL_API void eql_model_free(eql_model* model);

typedef void (*eql_progress_fn)(size_t done, size_t total, const char* message, void* user);

/* grid_json: {"lambdas": [...], "layers": [...], "units": [[u, v], ...],
 * "seeds": [...], "kind", "menu", "train": {...}}. Tests are optional
 * named sets evaluated for every candidate. */
EQL_API eql_status eql_sweep_run(const char* grid_json, const eql_dataset* train, const eql_dataset* validation,
                                 const char* const* test_names, const eql_dataset* const* tests, size_t test_count,
                                 int jobs, eql_progress_fn progress, void* user, eql_sweep** out);
EQL_API eql_status eql_sweep_count(const eql_sweep* sweep, size_t* out);
/* criterion: "rank_norm" or "validation_only". */
EQL_API eql_status eql_sweep_select(const eql_sweep* sweep, const char* criterion, size_t* index);
EQL_API eql_status eql_sweep_model(const eql_sweep* sweep, size_t index, eql_model** out);
EQL_API eql_status eql_sweep_report_csv(const eql_sweep* sweep, size_t selected, char** out);
/* Selected candidate plus mean and sample stddev per split over its seeds. */
EQL_API eql_status eql_sweep_summary_json(const eql_sweep* sweep, size_t selected, char** out);
EQL_API void eql_sweep_free(eql_sweep* sweep);

/* config_json: {"benchmark", "h", "sigmas", "counts", "network", "train",
 * "test_count", "data_seed", "extrap_split"}; writes the grid as CSV. */
EQL_API eql_status eql_noise_grid_run(const char* config_json, int jobs, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif
