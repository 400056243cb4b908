#ifndef DEEPKERNEL_CAPI_H
#define DEEPKERNEL_CAPI_H

/* C interface to the deepkernel library.
 *
 * Every function that can fail returns a dk_status; outputs come back
 * through trailing out-parameters. On failure the out-parameters are left
 * untouched and dk_last_error() returns a message describing what went
 * wrong (thread-local, valid until the next failing call on the same
 * thread). Objects are opaque handles released with the matching _free
 * call; strings returned through char** are released with dk_string_free.
 *
 * Kernel specs travel as JSON:
 *   leaf: {"kind":"leaf","base":"SE","params":{"sigma":1.0,"ell":1.0}}
 *   wrap: {"kind":"wrap","outer":"SE","params":{"sigma":1.0,"ell":1.0},
 *          "inner":{...}}
 * Base kinds: SE, SC, Lin, NuN, Const. Wrap outers: SE, SC, NuN, ErfSESESE
 * (the erf three-layer form, whose params are sigma3/ell3/sigma2/ell2 and
 * whose inner node must be a leaf).
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DK_API __declspec(dllexport)
#else
#define DK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int dk_status;
enum {
    DK_OK = 0,
    DK_ERR_INVALID_ARGUMENT = 1, /* caller passed something unusable */
    DK_ERR_NUMERICAL = 2,        /* factorization/optimization breakdown */
    DK_ERR_VALIDATION = 3        /* content failed a domain check */
};

typedef struct dk_kernel dk_kernel;
typedef struct dk_dataset dk_dataset;
typedef struct dk_gp dk_gp;
typedef struct dk_fit dk_fit;

DK_API const char* dk_version(void);
DK_API const char* dk_last_error(void);
DK_API void dk_string_free(char* s);

/* ---- kernel specs ---- */

DK_API dk_status dk_kernel_parse(const char* json_text, dk_kernel** out);
DK_API dk_status dk_kernel_to_json(const dk_kernel* k, int indent, char** out);
/* Compact label like "SE[SE]". */
DK_API dk_status dk_kernel_describe(const dk_kernel* k, char** out);
DK_API dk_status dk_kernel_eval(const dk_kernel* k, const double* x, const double* y,
                                int dim, double* out);
DK_API dk_status dk_kernel_eval_diag(const dk_kernel* k, const double* x, int dim,
                                     double* out);
/* Expressivity parameter; fails with DK_ERR_INVALID_ARGUMENT on a leaf. */
DK_API dk_status dk_kernel_chi(const dk_kernel* k, double* out);
/* Curvature diagnostic E[(df/dx)^2] at a 1-D input. */
DK_API dk_status dk_kernel_expected_sq_derivative(const dk_kernel* k, const double* at,
                                                  int dim, double* out);
DK_API void dk_kernel_free(dk_kernel* k);

/* ---- datasets ---- */

/* X is row-major n x d. */
DK_API dk_status dk_dataset_create(const double* X, const double* y, int n, int d,
                                   dk_dataset** out);
DK_API dk_status dk_dataset_read_csv(const char* path, dk_dataset** out);
/* comments, if any, are written as leading '#' lines. */
DK_API dk_status dk_dataset_to_csv(const dk_dataset* ds, const char* const* comments,
                                   int n_comments, char** out);
DK_API dk_status dk_dataset_write_csv(const dk_dataset* ds, const char* path,
                                      const char* const* comments, int n_comments);
DK_API int dk_dataset_rows(const dk_dataset* ds);
DK_API int dk_dataset_dims(const dk_dataset* ds);
/* Copies into caller buffers: X_out rows*dims (row-major), y_out rows. Either
 * pointer may be NULL to skip that side. */
DK_API dk_status dk_dataset_get(const dk_dataset* ds, double* X_out, double* y_out);
DK_API void dk_dataset_free(dk_dataset* ds);

/* ---- synthetic data generators ---- */

DK_API dk_status dk_gen_two_scale(int n, double x_lo, double x_hi, double long_sigma,
                                  double long_ell, double short_sigma, double short_ell,
                                  double noise_sd, uint64_t seed, dk_dataset** out);
DK_API dk_status dk_gen_pure_noise(int n, double sd, double x_lo, double x_hi,
                                   uint64_t seed, dk_dataset** out);
DK_API dk_status dk_gen_from_kernel(const dk_kernel* k, int n, double noise_sd,
                                    double x_lo, double x_hi, uint64_t seed,
                                    dk_dataset** out);

/* ---- GP prior and posterior ---- */

/* Draws n_functions prior samples at the n x d inputs X (row-major); out
 * receives n_functions * n values, one function per row. The underlying
 * standard-normal vectors depend only on (seed, row), so different kernels
 * sampled with the same seed share them. */
DK_API dk_status dk_sample_prior(const dk_kernel* k, const double* X, int n, int d,
                                 int n_functions, uint64_t seed, double* out);

DK_API dk_status dk_gp_create(const dk_kernel* k, double noise_variance,
                              const dk_dataset* ds, dk_gp** out);
DK_API dk_status dk_gp_lml(const dk_gp* gp, double* out);
/* mean_out/var_out hold n_star values; clamped_out (optional) counts variance
 * entries that were below -1e-10 before clamping to zero. include_noise adds
 * the observation noise to the predictive variance. */
DK_API dk_status dk_gp_predict(const dk_gp* gp, const double* X_star, int n_star,
                               int d, int include_noise, double* mean_out,
                               double* var_out, int* clamped_out);
DK_API void dk_gp_free(dk_gp* gp);

/* ---- hyperparameter fitting ---- */

/* Multi-restart Nelder-Mead maximum marginal likelihood on the template's
 * parameters plus the noise variance (log space, uniform(-10,10) inits). */
DK_API dk_status dk_fit_run(const dk_kernel* templ, const dk_dataset* ds, int restarts,
                            uint64_t seed, int budget, dk_fit** out);
DK_API dk_status dk_fit_to_json(const dk_fit* f, int indent, char** out);
DK_API dk_status dk_fit_best_lml(const dk_fit* f, double* out);
DK_API dk_status dk_fit_best_noise(const dk_fit* f, double* out);
DK_API dk_status dk_fit_best_kernel(const dk_fit* f, dk_kernel** out);
/* Loads the kernel, noise variance and best LML back out of a serialized
 * fit report. Any output pointer may be NULL. */
DK_API dk_status dk_fit_parse(const char* json_text, dk_kernel** kernel_out,
                              double* noise_out, double* lml_out);
DK_API void dk_fit_free(dk_fit* f);

/* ---- verification reports ---- */

/* Fourth-moment report for a depth-2/3 spec over the n x d inputs X:
 * analytic moments vs an ancestral Monte-Carlo oracle plus heavy-tail
 * margins. csv_out receives the row-per-quartet report; all_ok_out is 1 when
 * every margin and oracle check passed. corrupt_delta shifts the analytic
 * values (harness self-test hook); pass 0 for a real run. */
DK_API dk_status dk_moments_report(const dk_kernel* k, const double* X, int n, int d,
                                   int64_t n_samples, uint64_t seed,
                                   double corrupt_delta, char** csv_out,
                                   int* all_ok_out);

/* Joint-density sign-flip symmetry check (latent layers negated); ok_out is
 * 1 when all trials match to relative 1e-10. inner_mean shifts the latent
 * mean and should break the symmetry when nonzero. */
DK_API dk_status dk_sign_flip_check(const dk_kernel* k, const double* X, int n, int d,
                                    int trials, uint64_t seed, double inner_mean,
                                    int* ok_out);

/* Expressivity sweep driven by a JSON config:
 *   {"generators": [<kernel JSON>, ...],   // optional, default set if absent
 *    "n_points": 150, "draws_per_generator": 1, "restarts": 20,
 *    "budget": 300, "noise_sd": 0.1, "x_lo": 0.0, "x_hi": 10.0, "seed": 0}
 * All keys optional. csv_out receives one row per (generator, draw, restart)
 * with columns generator_kernel,draw_seed,restart,final_lml,log_chi. */
DK_API dk_status dk_chi_sweep(const char* config_json, char** csv_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DEEPKERNEL_CAPI_H */
