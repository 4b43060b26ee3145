#include "mesb/mesb.h"

#include <cstring>
#include <iostream>
#include <string>

#include "mesb/config.hpp"
#include "mesb/external_denoiser.hpp"
#include "mesb/runner.hpp"
#include "mesb/theory.hpp"

namespace {

thread_local std::string g_last_error;

mesb_status status_for(const mesb::Error& e) {
  switch (e.kind()) {
    case mesb::ErrorKind::InvalidArgument: return MESB_ERR_INVALID_ARGUMENT;
    case mesb::ErrorKind::OperatorContract: return MESB_ERR_OPERATOR_CONTRACT;
    case mesb::ErrorKind::Capability: return MESB_ERR_CAPABILITY;
    case mesb::ErrorKind::External: return MESB_ERR_EXTERNAL;
    case mesb::ErrorKind::Protocol: return MESB_ERR_PROTOCOL;
    case mesb::ErrorKind::Io: return MESB_ERR_IO;
    case mesb::ErrorKind::Config: return MESB_ERR_CONFIG;
    case mesb::ErrorKind::Internal: return MESB_ERR_INTERNAL;
  }
  return MESB_ERR_INTERNAL;
}

template <typename Fn>
mesb_status guarded(Fn&& fn) {
  try {
    fn();
    return MESB_OK;
  } catch (const mesb::Error& e) {
    g_last_error = e.what();
    return status_for(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MESB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return MESB_ERR_INTERNAL;
  }
}

mesb::Shape shape_from(const uint32_t* dims, uint32_t ndim) {
  if (dims == nullptr || ndim == 0) mesb::fail_invalid("shape must have at least one dimension");
  mesb::Shape shape(ndim);
  for (uint32_t i = 0; i < ndim; ++i) shape[i] = dims[i];
  return shape;
}

template <typename T>
void require(T* p, const char* what) {
  if (p == nullptr) mesb::fail_invalid(std::string(what) + " must not be NULL");
}

}  // namespace

struct mesb_tensor {
  mesb::Tensor value;
};
struct mesb_rng {
  mesb::SeededRng value;
};
struct mesb_schedule {
  mesb::NoiseSchedule value;
};
struct mesb_grid {
  mesb::TimeGrid value;
};
struct mesb_operator {
  mesb::OperatorPtr value;
};
struct mesb_denoiser {
  mesb::DenoiserPtr value;
};

// Definitions below take C linkage from the declarations in mesb/mesb.h.

const char* mesb_version(void) { return "0.1.0"; }

const char* mesb_error_message(void) { return g_last_error.c_str(); }

/* ---- tensors ---- */

mesb_status mesb_tensor_create(const uint32_t* dims, uint32_t ndim, const double* data_or_null,
                               mesb_tensor** out) {
  return guarded([&] {
    require(out, "out");
    const mesb::Shape shape = shape_from(dims, ndim);
    mesb::Tensor t;
    if (data_or_null != nullptr) {
      std::vector<double> data(data_or_null, data_or_null + mesb::shape_size(shape));
      t = mesb::Tensor::from_data(shape, std::move(data));
    } else {
      t = mesb::Tensor::zeros(shape);
    }
    *out = new mesb_tensor{std::move(t)};
  });
}

void mesb_tensor_free(mesb_tensor* t) { delete t; }

uint64_t mesb_tensor_size(const mesb_tensor* t) { return t ? t->value.size() : 0; }

uint32_t mesb_tensor_ndim(const mesb_tensor* t) {
  return t ? static_cast<uint32_t>(t->value.shape().size()) : 0;
}

mesb_status mesb_tensor_dims(const mesb_tensor* t, uint32_t* dims_out) {
  return guarded([&] {
    require(t, "tensor");
    require(dims_out, "dims_out");
    const auto& shape = t->value.shape();
    for (std::size_t i = 0; i < shape.size(); ++i) dims_out[i] = static_cast<uint32_t>(shape[i]);
  });
}

const double* mesb_tensor_data(const mesb_tensor* t) { return t ? t->value.data() : nullptr; }

double* mesb_tensor_data_mut(mesb_tensor* t) { return t ? t->value.data() : nullptr; }

mesb_status mesb_axpby(double a, const mesb_tensor* x, double b, const mesb_tensor* y,
                       mesb_tensor** out) {
  return guarded([&] {
    require(x, "x");
    require(y, "y");
    require(out, "out");
    *out = new mesb_tensor{mesb::axpby(a, x->value, b, y->value)};
  });
}

mesb_status mesb_dot(const mesb_tensor* x, const mesb_tensor* y, double* out) {
  return guarded([&] {
    require(x, "x");
    require(y, "y");
    require(out, "out");
    *out = mesb::dot(x->value, y->value);
  });
}

mesb_status mesb_norm2(const mesb_tensor* x, double* out) {
  return guarded([&] {
    require(x, "x");
    require(out, "out");
    *out = mesb::norm2(x->value);
  });
}

/* ---- rng ---- */

mesb_status mesb_rng_create(uint64_t seed, mesb_rng** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_rng{mesb::SeededRng(seed)};
  });
}

void mesb_rng_free(mesb_rng* rng) { delete rng; }

mesb_status mesb_gaussian(const uint32_t* dims, uint32_t ndim, mesb_rng* rng,
                          mesb_tensor** out) {
  return guarded([&] {
    require(rng, "rng");
    require(out, "out");
    *out = new mesb_tensor{mesb::gaussian(shape_from(dims, ndim), rng->value)};
  });
}

/* ---- schedule / grid ---- */

mesb_status mesb_schedule_create_symmetric(double beta_min, double beta_max, uint64_t n_base,
                                           mesb_schedule** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_schedule{
        mesb::NoiseSchedule::symmetric_beta(beta_min, beta_max, static_cast<std::size_t>(n_base))};
  });
}

void mesb_schedule_free(mesb_schedule* s) { delete s; }

mesb_status mesb_schedule_sigma2(const mesb_schedule* s, double t, double* out) {
  return guarded([&] {
    require(s, "schedule");
    require(out, "out");
    *out = s->value.sigma2(t);
  });
}

mesb_status mesb_schedule_sigma_bar2(const mesb_schedule* s, double t, double* out) {
  return guarded([&] {
    require(s, "schedule");
    require(out, "out");
    *out = s->value.sigma_bar2(t);
  });
}

mesb_status mesb_schedule_alpha2(const mesb_schedule* s, double t_a, double t_b, double* out) {
  return guarded([&] {
    require(s, "schedule");
    require(out, "out");
    *out = s->value.alpha2(t_a, t_b);
  });
}

mesb_status mesb_grid_quadratic(uint64_t n_steps, int32_t dense_near_one, mesb_grid** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_grid{
        mesb::TimeGrid::quadratic(static_cast<std::size_t>(n_steps), dense_near_one != 0)};
  });
}

void mesb_grid_free(mesb_grid* g) { delete g; }

uint64_t mesb_grid_steps(const mesb_grid* g) { return g ? g->value.steps() : 0; }

mesb_status mesb_grid_time(const mesb_grid* g, uint64_t n, double* out) {
  return guarded([&] {
    require(g, "grid");
    require(out, "out");
    if (n >= g->value.times.size()) mesb::fail_invalid("grid index out of range");
    *out = g->value.times[n];
  });
}

/* ---- operators ---- */

mesb_status mesb_operator_identity(const uint32_t* dims, uint32_t ndim, mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_operator{mesb::identity(shape_from(dims, ndim))};
  });
}

mesb_status mesb_operator_gaussian_blur(uint32_t rows, uint32_t cols, double sigma,
                                        mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_operator{mesb::gaussian_blur({rows, cols}, sigma)};
  });
}

mesb_status mesb_operator_block_downsample(uint32_t rows, uint32_t cols, uint32_t factor,
                                           mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_operator{mesb::block_downsample({rows, cols}, factor)};
  });
}

mesb_status mesb_operator_nearest_upsample(uint32_t small_rows, uint32_t small_cols,
                                           uint32_t factor, mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_operator{mesb::nearest_upsample({small_rows, small_cols}, factor)};
  });
}

mesb_status mesb_operator_mask(uint32_t rows, uint32_t cols, const uint64_t* kept,
                               uint64_t kept_count, mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    require(kept, "kept");
    std::vector<std::size_t> indices(kept, kept + kept_count);
    *out = new mesb_operator{mesb::mask({rows, cols}, std::move(indices))};
  });
}

mesb_status mesb_operator_toy_radon(uint32_t image_size, uint32_t n_views, uint32_t n_detectors,
                                    mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_operator{mesb::toy_radon(image_size, n_views, n_detectors)};
  });
}

mesb_status mesb_operator_laplacian_gram(uint32_t rows, uint32_t cols, mesb_operator** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mesb_operator{mesb::laplacian_gram({rows, cols})};
  });
}

void mesb_operator_free(mesb_operator* op) { delete op; }

mesb_status mesb_operator_apply(const mesb_operator* op, const mesb_tensor* x,
                                mesb_tensor** out) {
  return guarded([&] {
    require(op, "operator");
    require(x, "x");
    require(out, "out");
    *out = new mesb_tensor{op->value->apply(x->value)};
  });
}

mesb_status mesb_operator_adjoint(const mesb_operator* op, const mesb_tensor* y,
                                  mesb_tensor** out) {
  return guarded([&] {
    require(op, "operator");
    require(y, "y");
    require(out, "out");
    *out = new mesb_tensor{op->value->adjoint(y->value)};
  });
}

mesb_status mesb_operator_partial_isometry(const mesb_operator* op, double tolerance,
                                           double* alpha0_out, int32_t* found) {
  return guarded([&] {
    require(op, "operator");
    require(alpha0_out, "alpha0_out");
    require(found, "found");
    const auto alpha0 = mesb::partial_isometry_check(*op->value, tolerance);
    *found = alpha0.has_value() ? 1 : 0;
    *alpha0_out = alpha0.value_or(0.0);
  });
}

/* ---- cg ---- */

mesb_status mesb_cg_solve(mesb_apply_fn apply, void* user_data, const mesb_tensor* rhs,
                          const mesb_tensor* x0, uint64_t max_iters, double residual_tol,
                          mesb_tensor** x_out, uint64_t* iters_out, double* residual_out) {
  return guarded([&] {
    require(apply, "apply");
    require(rhs, "rhs");
    require(x0, "x0");
    require(x_out, "x_out");
    mesb::SpdSystem system;
    system.rhs = rhs->value;
    system.op = [apply, user_data](const mesb::Tensor& x) {
      mesb::Tensor out = mesb::Tensor::zeros(x.shape());
      apply(x.data(), out.data(), x.size(), user_data);
      return out;
    };
    const mesb::CgResult result =
        mesb::cg_solve(system, x0->value, static_cast<std::size_t>(max_iters), residual_tol);
    *x_out = new mesb_tensor{result.x};
    if (iters_out != nullptr) *iters_out = result.iters;
    if (residual_out != nullptr) *residual_out = result.final_residual;
  });
}

/* ---- denoisers ---- */

mesb_status mesb_denoiser_gaussian_analytic(const mesb_tensor* mu0, double s0sq,
                                            const mesb_schedule* schedule, mesb_denoiser** out) {
  return guarded([&] {
    require(mu0, "mu0");
    require(schedule, "schedule");
    require(out, "out");
    *out = new mesb_denoiser{
        mesb::make_gaussian_analytic_denoiser(mu0->value, s0sq, schedule->value)};
  });
}

mesb_status mesb_denoiser_oracle(const mesb_tensor* x0_true, const mesb_schedule* schedule,
                                 mesb_denoiser** out) {
  return guarded([&] {
    require(x0_true, "x0_true");
    require(schedule, "schedule");
    require(out, "out");
    *out = new mesb_denoiser{mesb::make_oracle_denoiser(x0_true->value, schedule->value)};
  });
}

mesb_status mesb_denoiser_external(const char* command_line, int32_t timeout_ms,
                                   mesb_denoiser** out) {
  return guarded([&] {
    require(command_line, "command_line");
    require(out, "out");
    *out = new mesb_denoiser{mesb::make_external_denoiser(command_line, timeout_ms)};
  });
}

namespace {

class CallbackDenoiser final : public mesb::Denoiser {
 public:
  CallbackDenoiser(mesb_predict_fn predict, mesb_vjp_fn vjp, void* user_data)
      : predict_(predict), vjp_(vjp), user_data_(user_data) {}

  mesb::Tensor predict_eps(const mesb::Tensor& x_t, double t,
                           const mesb::Conditioning& cond) const override {
    mesb::Tensor out = mesb::Tensor::zeros(x_t.shape());
    const int32_t rc =
        predict_(x_t.data(), cond.x_corrupt.data(), x_t.size(), t, out.data(), user_data_);
    if (rc != 0) {
      mesb::fail(mesb::ErrorKind::External,
                 "custom denoiser callback failed with code " + std::to_string(rc));
    }
    return out;
  }

  bool has_vjp() const override { return vjp_ != nullptr; }

  mesb::Tensor vjp(const mesb::Tensor& x_n, double t, const mesb::Conditioning& cond,
                   const mesb::Tensor& v) const override {
    if (vjp_ == nullptr) return Denoiser::vjp(x_n, t, cond, v);
    mesb::Tensor out = mesb::Tensor::zeros(v.shape());
    const int32_t rc =
        vjp_(x_n.data(), cond.x_corrupt.data(), x_n.size(), t, v.data(), out.data(), user_data_);
    if (rc != 0) {
      mesb::fail(mesb::ErrorKind::External,
                 "custom denoiser vjp callback failed with code " + std::to_string(rc));
    }
    return out;
  }

 private:
  mesb_predict_fn predict_;
  mesb_vjp_fn vjp_;
  void* user_data_;
};

}  // namespace

mesb_status mesb_denoiser_custom(mesb_predict_fn predict, mesb_vjp_fn vjp_or_null,
                                 void* user_data, mesb_denoiser** out) {
  return guarded([&] {
    require(predict, "predict");
    require(out, "out");
    *out = new mesb_denoiser{
        std::make_shared<CallbackDenoiser>(predict, vjp_or_null, user_data)};
  });
}

void mesb_denoiser_free(mesb_denoiser* d) { delete d; }

mesb_status mesb_denoiser_predict_eps(const mesb_denoiser* d, const mesb_tensor* x_t, double t,
                                      const mesb_tensor* x_corrupt, mesb_tensor** eps_out) {
  return guarded([&] {
    require(d, "denoiser");
    require(x_t, "x_t");
    require(x_corrupt, "x_corrupt");
    require(eps_out, "eps_out");
    *eps_out = new mesb_tensor{
        d->value->predict_eps(x_t->value, t, mesb::Conditioning{x_corrupt->value})};
  });
}

mesb_status mesb_x0_hat(const mesb_denoiser* d, const mesb_tensor* x_t, double t,
                        const mesb_tensor* x_corrupt, const mesb_schedule* schedule,
                        mesb_tensor** out) {
  return guarded([&] {
    require(d, "denoiser");
    require(x_t, "x_t");
    require(x_corrupt, "x_corrupt");
    require(schedule, "schedule");
    require(out, "out");
    *out = new mesb_tensor{mesb::x0_hat(*d->value, x_t->value, t,
                                        mesb::Conditioning{x_corrupt->value}, schedule->value)};
  });
}

/* ---- sampling ---- */

namespace {

mesb::SamplerConfig config_from(const mesb_sampler_config* c) {
  require(c, "config");
  mesb::SamplerConfig config;
  switch (c->kind) {
    case MESB_SAMPLER_I2SB: config.kind = mesb::SamplerKind::I2sb; break;
    case MESB_SAMPLER_PROJECT: config.kind = mesb::SamplerKind::Project; break;
    case MESB_SAMPLER_CDDB: config.kind = mesb::SamplerKind::Cddb; break;
    case MESB_SAMPLER_CDDB_DEEP: config.kind = mesb::SamplerKind::CddbDeep; break;
    case MESB_SAMPLER_MESB: config.kind = mesb::SamplerKind::Mesb; break;
    default: mesb::fail_invalid("unknown sampler kind " + std::to_string(c->kind));
  }
  config.steps = static_cast<std::size_t>(c->steps);
  config.cg_iters = static_cast<std::size_t>(c->cg_iters);
  config.k_y = c->k_y;
  config.k_E = c->k_E;
  if (c->t_gram != nullptr) config.t_gram = c->t_gram->value;
  config.alpha = c->alpha;
  config.stochastic = c->stochastic != 0;
  config.seed = c->seed;
  config.dense_near_one = c->dense_near_one != 0;
  return config;
}

}  // namespace

mesb_status mesb_forward_sample(const mesb_tensor* x0, const mesb_tensor* x1, double t,
                                const mesb_schedule* schedule, mesb_rng* rng,
                                mesb_tensor** out) {
  return guarded([&] {
    require(x0, "x0");
    require(x1, "x1");
    require(schedule, "schedule");
    require(rng, "rng");
    require(out, "out");
    *out = new mesb_tensor{
        mesb::forward_sample(x0->value, x1->value, t, schedule->value, rng->value)};
  });
}

mesb_status mesb_ddpm_posterior_sample(const mesb_tensor* x0_in, const mesb_tensor* x_n,
                                       uint64_t n, const mesb_grid* grid,
                                       const mesb_schedule* schedule, mesb_rng* rng,
                                       int32_t stochastic, mesb_tensor** out) {
  return guarded([&] {
    require(x0_in, "x0_in");
    require(x_n, "x_n");
    require(grid, "grid");
    require(schedule, "schedule");
    require(rng, "rng");
    require(out, "out");
    *out = new mesb_tensor{mesb::ddpm_posterior_sample(x0_in->value, x_n->value,
                                                       static_cast<std::size_t>(n), grid->value,
                                                       schedule->value, rng->value,
                                                       stochastic != 0)};
  });
}

mesb_status mesb_reverse_run(const mesb_denoiser* denoiser, const mesb_tensor* x_corrupt,
                             const mesb_tensor* y, const mesb_operator* A,
                             const mesb_sampler_config* config, const mesb_schedule* schedule,
                             const mesb_grid* grid, mesb_tensor** x0_out, double* cg_residuals,
                             double* data_residuals) {
  return guarded([&] {
    require(denoiser, "denoiser");
    require(x_corrupt, "x_corrupt");
    require(schedule, "schedule");
    require(grid, "grid");
    require(x0_out, "x0_out");
    mesb::TaskInputs inputs;
    inputs.x_corrupt = x_corrupt->value;
    if (y != nullptr) inputs.y = y->value;
    if (A != nullptr) inputs.A = A->value;
    const auto [x0, trajectory] = mesb::reverse_run(*denoiser->value, inputs, config_from(config),
                                                    schedule->value, grid->value);
    *x0_out = new mesb_tensor{x0};
    if (cg_residuals != nullptr || data_residuals != nullptr) {
      for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        if (cg_residuals != nullptr) cg_residuals[i] = trajectory.steps[i].cg_residual;
        if (data_residuals != nullptr) data_residuals[i] = trajectory.steps[i].data_residual;
      }
    }
  });
}

/* ---- tasks & metrics ---- */

mesb_status mesb_make_task(const mesb_task_params* params, uint64_t seed, mesb_tensor** x_true,
                           mesb_tensor** y, mesb_tensor** x_corrupt, mesb_operator** A) {
  return guarded([&] {
    require(params, "params");
    require(x_true, "x_true");
    require(y, "y");
    require(x_corrupt, "x_corrupt");
    require(A, "A");
    mesb::TaskSpec spec;
    switch (params->kind) {
      case MESB_TASK_DEBLUR_GAUSS: spec.kind = mesb::TaskKind::DeblurGauss; break;
      case MESB_TASK_SR_BLOCK: spec.kind = mesb::TaskKind::SrBlock; break;
      case MESB_TASK_INPAINT: spec.kind = mesb::TaskKind::Inpaint; break;
      case MESB_TASK_CT_TOY: spec.kind = mesb::TaskKind::CtToy; break;
      default: mesb::fail_invalid("unknown task kind " + std::to_string(params->kind));
    }
    spec.size = params->size;
    spec.noise_percent = params->noise_percent;
    spec.blur_sigma = params->blur_sigma;
    spec.sr_factor = params->sr_factor;
    spec.keep_fraction = params->keep_fraction;
    spec.ct_views = params->ct_views;
    spec.ct_detectors = params->ct_detectors;
    mesb::SeededRng rng(seed);
    mesb::Task task = mesb::make_task(spec, rng);
    *x_true = new mesb_tensor{std::move(task.x_true)};
    *y = new mesb_tensor{std::move(task.y)};
    *x_corrupt = new mesb_tensor{std::move(task.x_corrupt)};
    *A = new mesb_operator{std::move(task.A)};
  });
}

mesb_status mesb_psnr(const mesb_tensor* x, const mesb_tensor* ref, double data_range,
                      double* out) {
  return guarded([&] {
    require(x, "x");
    require(ref, "ref");
    require(out, "out");
    *out = mesb::psnr(x->value, ref->value, data_range);
  });
}

mesb_status mesb_ssim(const mesb_tensor* x, const mesb_tensor* ref, double data_range,
                      double* out) {
  return guarded([&] {
    require(x, "x");
    require(ref, "ref");
    require(out, "out");
    *out = mesb::ssim(x->value, ref->value, data_range);
  });
}

/* ---- commands ---- */

int32_t mesb_cmd_run(const char* config_path) {
  if (config_path == nullptr) return 1;
  return mesb::cmd_run(config_path, std::cout, std::cerr);
}

int32_t mesb_cmd_sweep(const char* config_path, const char* param, const double* values,
                       uint32_t n_values) {
  if (config_path == nullptr || param == nullptr || (values == nullptr && n_values > 0)) {
    return 1;
  }
  return mesb::cmd_sweep(config_path, param, std::span<const double>(values, n_values),
                         std::cout, std::cerr);
}

int32_t mesb_cmd_verify(const char* check_name) {
  if (check_name == nullptr) return 1;
  return mesb::cmd_verify(check_name, std::cout, std::cerr);
}

int32_t mesb_cmd_denoiser_check(const char* command, int32_t timeout_ms) {
  if (command == nullptr) return 1;
  return mesb::cmd_denoiser_check(command, timeout_ms, std::cout, std::cerr);
}
