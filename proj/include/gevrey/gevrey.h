#ifndef GEVREY_GEVREY_H
#define GEVREY_GEVREY_H

/* C interface of the gevrey library. Every function returns a status code;
   the message of the last failure on the calling thread is available from
   gv_last_error(). Strings returned through char** are owned by the caller
   and released with gv_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(GEVREY_BUILDING_LIBRARY)
#define GV_API __attribute__((visibility("default")))
#else
#define GV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  GV_OK = 0,
  GV_ERR_INTERNAL = 1,
  GV_ERR_VALIDATION = 2,
  GV_ERR_NUMERICAL = 3,
  GV_ERR_IO = 4,
  GV_ERR_INVALID_ARGUMENT = 5
} gv_status;

typedef enum { GV_RATE_SEMILOG_N = 0, GV_RATE_SEMILOG_SQRT_N = 1, GV_RATE_LOGLOG = 2 } gv_rate_model;

typedef struct gv_config gv_config;
typedef struct gv_result gv_result;

GV_API const char* gv_version(void);
GV_API const char* gv_last_error(void);
GV_API void gv_string_free(char* s);

/* Experiment configuration (JSON, schema_version 1). */
GV_API gv_status gv_config_load(const char* path, gv_config** out);
GV_API gv_status gv_config_from_json(const char* text, gv_config** out);
GV_API gv_status gv_config_set_seed(gv_config* cfg, uint64_t seed);
GV_API gv_status gv_config_set_output_dir(gv_config* cfg, const char* dir);
GV_API gv_status gv_config_set_threads(gv_config* cfg, int threads);
/* "gauss-sweep", "qmc-sweep", "mc-sweep", "derivative-check" or "suite";
   the pointer stays valid for the lifetime of the process. */
GV_API gv_status gv_config_experiment(const gv_config* cfg, const char** name);
GV_API gv_status gv_config_output_dir(const gv_config* cfg, char** out);
GV_API gv_status gv_config_to_json(const gv_config* cfg, char** out);
GV_API void gv_config_free(gv_config* cfg);

/* Runs the experiment. On GV_ERR_NUMERICAL *out still receives the partial
   result computed before the failure; otherwise *out is NULL on error. */
GV_API gv_status gv_run(const gv_config* cfg, gv_result** out);
GV_API gv_status gv_result_num_rows(const gv_result* r, size_t* count);
GV_API gv_status gv_result_row(const gv_result* r, size_t i, int* n, double* error);
/* *has_fit is 0 when too few rows lay above the noise floor. */
GV_API gv_status gv_result_fit(const gv_result* r, int* has_fit, double* slope, double* intercept, double* r_squared);
/* Bound checks (derivative-check) plus suite failures. */
GV_API gv_status gv_result_checks(const gv_result* r, size_t* total, size_t* failed);
GV_API gv_status gv_result_partial(const gv_result* r, int* partial);
GV_API gv_status gv_result_summary_json(const gv_result* r, char** out);
GV_API gv_status gv_result_write(const gv_result* r, const char* dir);
GV_API void gv_result_free(gv_result* r);

/* Theory constants of the configured problem as JSON. */
GV_API gv_status gv_constants_json(const gv_config* cfg, char** out);
/* [1/2]_n as an exact reduced fraction "p/q". */
GV_API gv_status gv_half_falling_factorial(unsigned n, char** out);
/* Gauss-Legendre rule on [-1, 1]; nodes and weights hold n entries. */
GV_API gv_status gv_gauss_rule(int n, double* nodes, double* weights);
GV_API gv_status gv_fit_rate(const int* n, const double* error, size_t count, gv_rate_model model, double noise_floor,
                             double window, double* slope, double* intercept, double* r_squared);
/* method: "poincare-chain" or "rayleigh". */
GV_API gv_status gv_embedding_constant(int p, const char* method, double* out);

#ifdef __cplusplus
}
#endif

#endif
