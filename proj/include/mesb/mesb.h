/* C API for the mesb shared library: Schrodinger-bridge samplers for
 * inverse problems behind opaque handles and status codes.
 *
 * Conventions:
 *   - Every fallible call returns mesb_status; MESB_OK is 0.
 *   - On failure, mesb_error_message() returns a thread-local description
 *     of the most recent error on the calling thread.
 *   - Objects are created into out-parameters and released with the
 *     matching *_free function. NULL is safe to pass to *_free.
 *   - Tensors are dense row-major doubles.
 */
#ifndef MESB_H
#define MESB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MESB_API __declspec(dllexport)
#else
#define MESB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t mesb_status;
enum {
  MESB_OK = 0,
  MESB_ERR_INVALID_ARGUMENT = 1,
  MESB_ERR_OPERATOR_CONTRACT = 2,
  MESB_ERR_CAPABILITY = 3,
  MESB_ERR_EXTERNAL = 4,
  MESB_ERR_PROTOCOL = 5,
  MESB_ERR_IO = 6,
  MESB_ERR_CONFIG = 7,
  MESB_ERR_INTERNAL = 8
};

typedef struct mesb_tensor mesb_tensor;
typedef struct mesb_rng mesb_rng;
typedef struct mesb_schedule mesb_schedule;
typedef struct mesb_grid mesb_grid;
typedef struct mesb_operator mesb_operator;
typedef struct mesb_denoiser mesb_denoiser;

MESB_API const char* mesb_version(void);
MESB_API const char* mesb_error_message(void);

/* ---- tensors ---- */
MESB_API mesb_status mesb_tensor_create(const uint32_t* dims, uint32_t ndim,
                                        const double* data_or_null, mesb_tensor** out);
MESB_API void mesb_tensor_free(mesb_tensor* t);
MESB_API uint64_t mesb_tensor_size(const mesb_tensor* t);
MESB_API uint32_t mesb_tensor_ndim(const mesb_tensor* t);
MESB_API mesb_status mesb_tensor_dims(const mesb_tensor* t, uint32_t* dims_out);
MESB_API const double* mesb_tensor_data(const mesb_tensor* t);
MESB_API double* mesb_tensor_data_mut(mesb_tensor* t);

MESB_API mesb_status mesb_axpby(double a, const mesb_tensor* x, double b, const mesb_tensor* y,
                                mesb_tensor** out);
MESB_API mesb_status mesb_dot(const mesb_tensor* x, const mesb_tensor* y, double* out);
MESB_API mesb_status mesb_norm2(const mesb_tensor* x, double* out);

/* ---- seeded randomness ---- */
MESB_API mesb_status mesb_rng_create(uint64_t seed, mesb_rng** out);
MESB_API void mesb_rng_free(mesb_rng* rng);
MESB_API mesb_status mesb_gaussian(const uint32_t* dims, uint32_t ndim, mesb_rng* rng,
                                   mesb_tensor** out);

/* ---- schedules and time grids ---- */
MESB_API mesb_status mesb_schedule_create_symmetric(double beta_min, double beta_max,
                                                    uint64_t n_base, mesb_schedule** out);
MESB_API void mesb_schedule_free(mesb_schedule* s);
MESB_API mesb_status mesb_schedule_sigma2(const mesb_schedule* s, double t, double* out);
MESB_API mesb_status mesb_schedule_sigma_bar2(const mesb_schedule* s, double t, double* out);
MESB_API mesb_status mesb_schedule_alpha2(const mesb_schedule* s, double t_a, double t_b,
                                          double* out);

MESB_API mesb_status mesb_grid_quadratic(uint64_t n_steps, int32_t dense_near_one,
                                         mesb_grid** out);
MESB_API void mesb_grid_free(mesb_grid* g);
MESB_API uint64_t mesb_grid_steps(const mesb_grid* g);
MESB_API mesb_status mesb_grid_time(const mesb_grid* g, uint64_t n, double* out);

/* ---- linear operators ---- */
MESB_API mesb_status mesb_operator_identity(const uint32_t* dims, uint32_t ndim,
                                            mesb_operator** out);
MESB_API mesb_status mesb_operator_gaussian_blur(uint32_t rows, uint32_t cols, double sigma,
                                                 mesb_operator** out);
MESB_API mesb_status mesb_operator_block_downsample(uint32_t rows, uint32_t cols,
                                                    uint32_t factor, mesb_operator** out);
MESB_API mesb_status mesb_operator_nearest_upsample(uint32_t small_rows, uint32_t small_cols,
                                                    uint32_t factor, mesb_operator** out);
MESB_API mesb_status mesb_operator_mask(uint32_t rows, uint32_t cols, const uint64_t* kept,
                                        uint64_t kept_count, mesb_operator** out);
MESB_API mesb_status mesb_operator_toy_radon(uint32_t image_size, uint32_t n_views,
                                             uint32_t n_detectors, mesb_operator** out);
MESB_API mesb_status mesb_operator_laplacian_gram(uint32_t rows, uint32_t cols,
                                                  mesb_operator** out);
MESB_API void mesb_operator_free(mesb_operator* op);
MESB_API mesb_status mesb_operator_apply(const mesb_operator* op, const mesb_tensor* x,
                                         mesb_tensor** out);
MESB_API mesb_status mesb_operator_adjoint(const mesb_operator* op, const mesb_tensor* y,
                                           mesb_tensor** out);
/* *found is set to 1 and *alpha0_out filled when the operator is a scaled
 * partial isometry, else *found is 0. */
MESB_API mesb_status mesb_operator_partial_isometry(const mesb_operator* op, double tolerance,
                                                    double* alpha0_out, int32_t* found);

/* ---- matrix-free conjugate gradients ---- */
typedef void (*mesb_apply_fn)(const double* x, double* out, uint64_t n, void* user_data);
MESB_API mesb_status mesb_cg_solve(mesb_apply_fn apply, void* user_data,
                                   const mesb_tensor* rhs, const mesb_tensor* x0,
                                   uint64_t max_iters, double residual_tol, mesb_tensor** x_out,
                                   uint64_t* iters_out, double* residual_out);

/* ---- denoisers ---- */
MESB_API mesb_status mesb_denoiser_gaussian_analytic(const mesb_tensor* mu0, double s0sq,
                                                     const mesb_schedule* schedule,
                                                     mesb_denoiser** out);
MESB_API mesb_status mesb_denoiser_oracle(const mesb_tensor* x0_true,
                                          const mesb_schedule* schedule, mesb_denoiser** out);
MESB_API mesb_status mesb_denoiser_external(const char* command_line, int32_t timeout_ms,
                                            mesb_denoiser** out);

/* Custom denoiser over a C callback. Returns nonzero from the callback to
 * signal failure. vjp may be NULL (has_vjp false). */
typedef int32_t (*mesb_predict_fn)(const double* x_t, const double* x_corrupt, uint64_t n,
                                   double t, double* eps_out, void* user_data);
typedef int32_t (*mesb_vjp_fn)(const double* x_n, const double* x_corrupt, uint64_t n, double t,
                               const double* v, double* out, void* user_data);
MESB_API mesb_status mesb_denoiser_custom(mesb_predict_fn predict, mesb_vjp_fn vjp_or_null,
                                          void* user_data, mesb_denoiser** out);
MESB_API void mesb_denoiser_free(mesb_denoiser* d);
MESB_API mesb_status mesb_denoiser_predict_eps(const mesb_denoiser* d, const mesb_tensor* x_t,
                                               double t, const mesb_tensor* x_corrupt,
                                               mesb_tensor** eps_out);
MESB_API mesb_status mesb_x0_hat(const mesb_denoiser* d, const mesb_tensor* x_t, double t,
                                 const mesb_tensor* x_corrupt, const mesb_schedule* schedule,
                                 mesb_tensor** out);

/* ---- samplers ---- */
enum {
  MESB_SAMPLER_I2SB = 0,
  MESB_SAMPLER_PROJECT = 1,
  MESB_SAMPLER_CDDB = 2,
  MESB_SAMPLER_CDDB_DEEP = 3,
  MESB_SAMPLER_MESB = 4
};

typedef struct {
  int32_t kind;           /* MESB_SAMPLER_* */
  uint64_t steps;         /* N */
  uint64_t cg_iters;      /* p */
  double k_y;             /* may be INFINITY */
  double k_E;
  const mesb_operator* t_gram; /* T^T T, or NULL */
  double alpha;
  int32_t stochastic;
  uint64_t seed;
  int32_t dense_near_one;
} mesb_sampler_config;

MESB_API mesb_status mesb_forward_sample(const mesb_tensor* x0, const mesb_tensor* x1, double t,
                                         const mesb_schedule* schedule, mesb_rng* rng,
                                         mesb_tensor** out);
MESB_API mesb_status mesb_ddpm_posterior_sample(const mesb_tensor* x0_in, const mesb_tensor* x_n,
                                                uint64_t n, const mesb_grid* grid,
                                                const mesb_schedule* schedule, mesb_rng* rng,
                                                int32_t stochastic, mesb_tensor** out);

/* Full reverse run. y and A may be NULL for plain bridge sampling. When
 * cg_residuals/data_residuals are non-NULL they receive config->steps
 * values, ordered n = N..1. */
MESB_API mesb_status mesb_reverse_run(const mesb_denoiser* denoiser,
                                      const mesb_tensor* x_corrupt, const mesb_tensor* y,
                                      const mesb_operator* A,
                                      const mesb_sampler_config* config,
                                      const mesb_schedule* schedule, const mesb_grid* grid,
                                      mesb_tensor** x0_out, double* cg_residuals,
                                      double* data_residuals);

/* ---- tasks and metrics ---- */
enum {
  MESB_TASK_DEBLUR_GAUSS = 0,
  MESB_TASK_SR_BLOCK = 1,
  MESB_TASK_INPAINT = 2,
  MESB_TASK_CT_TOY = 3
};

typedef struct {
  int32_t kind;        /* MESB_TASK_* */
  uint32_t size;
  double noise_percent;
  double blur_sigma;
  uint32_t sr_factor;
  double keep_fraction;
  uint32_t ct_views;
  uint32_t ct_detectors;
} mesb_task_params;

MESB_API mesb_status mesb_make_task(const mesb_task_params* params, uint64_t seed,
                                    mesb_tensor** x_true, mesb_tensor** y,
                                    mesb_tensor** x_corrupt, mesb_operator** A);

MESB_API mesb_status mesb_psnr(const mesb_tensor* x, const mesb_tensor* ref, double data_range,
                               double* out);
MESB_API mesb_status mesb_ssim(const mesb_tensor* x, const mesb_tensor* ref, double data_range,
                               double* out);

/* ---- command entry points (exit-code semantics: 0 ok, 1 config, 2 runtime,
 * 3 I/O). Reports print to stdout, diagnostics to stderr. ---- */
MESB_API int32_t mesb_cmd_run(const char* config_path);
MESB_API int32_t mesb_cmd_sweep(const char* config_path, const char* param,
                                const double* values, uint32_t n_values);
MESB_API int32_t mesb_cmd_verify(const char* check_name);
MESB_API int32_t mesb_cmd_denoiser_check(const char* command, int32_t timeout_ms);

#ifdef __cplusplus
}
#endif

#endif /* MESB_H */
