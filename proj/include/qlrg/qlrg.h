#ifndef QLRG_H
#define QLRG_H

/* C interface to libqlrg. Handles are opaque; every function returning
 * qlrg_status leaves a message retrievable with qlrg_last_error() on failure
 * (per thread). Strings returned through char** are released with
 * qlrg_string_free. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define QLRG_API __declspec(dllexport)
#else
#define QLRG_API __attribute__((visibility("default")))
#endif

typedef enum qlrg_status {
  QLRG_OK = 0,
  QLRG_ERR_INVALID_ARGUMENT = 1,
  QLRG_ERR_ORDERING_MISMATCH = 2,
  QLRG_ERR_TRUNCATION_OVERFLOW = 3,
  QLRG_ERR_UNBOUNDED_BELOW = 4,
  QLRG_ERR_NON_CONVERGENCE = 5,
  QLRG_ERR_PARSE = 6,
  QLRG_ERR_IO = 7,
  QLRG_ERR_INTERNAL = 8
} qlrg_status;

typedef struct qlrg_modes qlrg_modes;
typedef struct qlrg_covariance qlrg_covariance;
typedef struct qlrg_poly qlrg_poly;

QLRG_API const char* qlrg_version(void);
QLRG_API const char* qlrg_last_error(void);
QLRG_API void qlrg_string_free(char* s);

/* Symmetric box window {n in Z^dim : |n_i| <= nmax}. */
QLRG_API qlrg_status qlrg_modes_box(int dim, int nmax, qlrg_modes** out);
QLRG_API qlrg_status qlrg_modes_size(const qlrg_modes* m, size_t* out);
QLRG_API void qlrg_modes_free(qlrg_modes* m);

/* Cutoff covariance with the exponential profile. */
QLRG_API qlrg_status qlrg_covariance_new(const qlrg_modes* m, double lambda, qlrg_covariance** out);
QLRG_API qlrg_status qlrg_covariance_value(const qlrg_covariance* c, size_t ordinal, double* out);
QLRG_API void qlrg_covariance_free(qlrg_covariance* c);

/* lambda phi^4 + m2/2 phi^2 on the window of c, Wick-ordered by c. */
QLRG_API qlrg_status qlrg_poly_phi4(const qlrg_covariance* c, double lambda, double m2, qlrg_poly** out);
QLRG_API qlrg_status qlrg_poly_from_json(const char* json, qlrg_poly** out);
QLRG_API qlrg_status qlrg_poly_to_json(const qlrg_poly* p, char** out);
QLRG_API qlrg_status qlrg_poly_size(const qlrg_poly* p, size_t* out);
QLRG_API qlrg_status qlrg_poly_is_quasilocal(const qlrg_poly* p, int* quasilocal, double* off_shell_mass);
QLRG_API qlrg_status qlrg_poly_u_apply(const qlrg_poly* p, double lambda_lo, qlrg_poly** out);
QLRG_API qlrg_status qlrg_poly_expectation(const qlrg_poly* p, const qlrg_covariance* target,
                                           double* re, double* im);
QLRG_API qlrg_status qlrg_poly_inner_product(const qlrg_poly* p, const qlrg_poly* q, double* re,
                                             double* im);
QLRG_API void qlrg_poly_free(qlrg_poly* p);

/* Default experiment configuration as JSON. */
QLRG_API qlrg_status qlrg_default_config(char** out);

/* Runs one subcommand. config_json may be NULL (defaults); out_dir may be
 * NULL (the config's out_dir). On QLRG_OK, *exit_code is 0 (all invariants
 * passed), 1 (hard failure) or 3 (statistical failure). */
QLRG_API qlrg_status qlrg_run_experiment(const char* subcommand, const char* config_json,
                                         const char* out_dir, int* exit_code);

#ifdef __cplusplus
}
#endif

#endif
