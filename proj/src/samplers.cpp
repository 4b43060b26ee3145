#include "mesb/samplers.hpp"

#include <cmath>

namespace mesb {

std::string sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::I2sb: return "i2sb";
    case SamplerKind::Project: return "project";
    case SamplerKind::Cddb: return "cddb";
    case SamplerKind::CddbDeep: return "cddb_deep";
    case SamplerKind::Mesb: return "mesb";
  }
  fail(ErrorKind::Internal, "unknown sampler kind");
}

SamplerKind sampler_kind_from_name(const std::string& name) {
  if (name == "i2sb") return SamplerKind::I2sb;
  if (name == "project") return SamplerKind::Project;
  if (name == "cddb") return SamplerKind::Cddb;
  if (name == "cddb_deep") return SamplerKind::CddbDeep;
  if (name == "mesb") return SamplerKind::Mesb;
  fail_invalid("unknown sampler kind '" + name +
               "' (expected i2sb|project|cddb|cddb_deep|mesb)");
}

Tensor forward_sample(const Tensor& x0, const Tensor& x1, double t,
                      const NoiseSchedule& schedule, SeededRng& rng) {
  if (!(t > 0.0 && t < 1.0)) {
    fail_invalid("forward_sample requires t in (0,1), got " + std::to_string(t));
  }
  if (!x0.same_shape(x1)) {
    fail_invalid("forward_sample: x0 shape " + shape_to_string(x0.shape()) +
                 " does not match x1 shape " + shape_to_string(x1.shape()));
  }
  const auto m = detail::forward_moments(schedule, t);
  Tensor x_t = axpby(m.a, x0, m.b, x1);
  if (m.v > 0.0) x_t = axpby(1.0, x_t, std::sqrt(m.v), gaussian(x_t.shape(), rng));
  return x_t;
}

Tensor ddpm_posterior_sample(const Tensor& x0_in, const Tensor& x_n, std::size_t n,
                             const TimeGrid& grid, const NoiseSchedule& schedule,
                             SeededRng& rng, bool stochastic) {
  if (n < 1 || n > grid.steps()) {
    fail_invalid("ddpm_posterior_sample requires 1 <= n <= N, got n = " + std::to_string(n));
  }
  if (!x0_in.same_shape(x_n)) {
    fail_invalid("ddpm_posterior_sample: shape mismatch between x0 and x_n");
  }
  const double t_prev = grid.times[n - 1];
  const double t_cur = grid.times[n];
  const double s2_prev = schedule.sigma2(t_prev);
  if (s2_prev == 0.0) return x0_in;  // n = 1: posterior collapses
  const double a2 = schedule.alpha2(t_prev, t_cur);
  const double denom = a2 + s2_prev;
  Tensor out = axpby(a2 / denom, x0_in, s2_prev / denom, x_n);
  if (stochastic) {
    const double stddev = std::sqrt(a2 * s2_prev / denom);
    out = axpby(1.0, out, stddev, gaussian(out.shape(), rng));
  }
  return out;
}

namespace {

struct UpdateOutcome {
  Tensor x0_new;
  double cg_residual = 0.0;
};

// Per-step extrapolation input X_{0,e} and its weight k_e. At n = N the
// formula is 0/0 (sigma_bar_N = 0); the limit along the bridge mean is
// x_corrupt, which is substituted with weight exactly 0.
struct Extrapolation {
  Tensor x0_e;
  double k_e = 0.0;
};

Extrapolation make_extrapolation(const Tensor& x_n, const Tensor& x_corrupt, double k_E,
                                 const NoiseSchedule& schedule, double t_n) {
  const double s2_n = schedule.sigma2(t_n);
  const double sb2_n = schedule.sigma_bar2(t_n);
  const double total2 = schedule.total_variance();
  Extrapolation e;
  e.k_e = k_E * s2_n * sb2_n / (total2 * total2);
  if (sb2_n == 0.0) {
    e.x0_e = x_corrupt;
    e.k_e = 0.0;
  } else {
    e.x0_e = axpby(total2 / sb2_n, x_n, -s2_n / sb2_n, x_corrupt);
  }
  return e;
}

UpdateOutcome project_update_full(const Tensor& x0_hat_in, const Tensor& y,
                                  const LinearOperator& a, std::size_t p) {
  SpdSystem system;
  system.rhs = axpby(1.0, y, -1.0, a.apply(x0_hat_in));
  system.op = [&a](const Tensor& z) { return a.apply(a.adjoint(z)); };
  const CgResult cg = cg_solve(system, Tensor::zeros(y.shape()), p);
  return {axpby(1.0, x0_hat_in, 1.0, a.adjoint(cg.x)), cg.final_residual};
}

UpdateOutcome mesb_update_full(const Tensor& x_n, const Tensor& x0_hat_in,
                               const Tensor& x_corrupt, const Tensor& y,
                               const LinearOperator& a, const SamplerConfig& config,
                               const NoiseSchedule& schedule, const TimeGrid& grid,
                               std::size_t n) {
  if (n < 1 || n > grid.steps()) {
    fail_invalid("mesb_update requires 1 <= n <= N, got n = " + std::to_string(n));
  }
  const double t_n = grid.times[n];

  if (std::isinf(config.k_y)) {
    // Hard data consistency: minimize the remaining isotropic terms, then
    // project the blend onto {A X = y}. Valid only for T = 0, where the
    // constrained minimizer of an isotropic quadratic is its projection.
    if (config.t_gram) {
      fail_invalid("mesb_update: k_y = inf is not supported together with a T operator");
    }
    Tensor blend = x0_hat_in;
    if (config.k_E > 0.0) {
      const Extrapolation e = make_extrapolation(x_n, x_corrupt, config.k_E, schedule, t_n);
      if (e.k_e > 0.0) {
        blend = axpby(1.0 / (1.0 + e.k_e), x0_hat_in, e.k_e / (1.0 + e.k_e), e.x0_e);
      }
    }
    return project_update_full(blend, y, a, config.cg_iters);
  }

  const Extrapolation e = make_extrapolation(x_n, x_corrupt, config.k_E, schedule, t_n);
  const SpdSystem system =
      mesb_normal_system(x0_hat_in, e.k_e > 0.0 ? &e.x0_e : nullptr, e.k_e, y, a, config.k_y,
                         config.t_gram.get());
  const CgResult cg = cg_solve(system, x0_hat_in, config.cg_iters);
  return {cg.x, cg.final_residual};
}

}  // namespace

SpdSystem mesb_normal_system(const Tensor& x0_hat_in, const Tensor* x0_e, double k_e,
                             const Tensor& y, const LinearOperator& a, double k_y,
                             const LinearOperator* t_gram) {
  if (!(k_y >= 0.0) || std::isinf(k_y)) {
    fail_invalid("mesb_normal_system requires finite k_y >= 0");
  }
  if (!(k_e >= 0.0)) fail_invalid("mesb_normal_system requires k_e >= 0");
  if (k_e > 0.0 && x0_e == nullptr) {
    fail_invalid("mesb_normal_system: k_e > 0 requires an extrapolation tensor");
  }

  SpdSystem system;
  Tensor rhs = x0_hat_in;
  if (t_gram != nullptr) rhs = axpby(1.0, rhs, 1.0, t_gram->apply(x0_hat_in));
  if (k_e > 0.0) rhs = axpby(1.0, rhs, k_e, *x0_e);
  if (k_y > 0.0) rhs = axpby(1.0, rhs, k_y, a.adjoint(y));
  system.rhs = std::move(rhs);

  // Keep the k_e = 0 / k_y = 0 / T = 0 paths free of added zero terms so the
  // degenerate configurations reproduce their base samplers bit-exactly.
  const LinearOperator* a_ptr = k_y > 0.0 ? &a : nullptr;
  system.op = [k_e, k_y, a_ptr, t_gram](const Tensor& x) {
    Tensor out = k_e > 0.0 ? scaled(1.0 + k_e, x) : x;
    if (t_gram != nullptr) out = axpby(1.0, out, 1.0, t_gram->apply(x));
    if (a_ptr != nullptr) out = axpby(1.0, out, k_y, a_ptr->adjoint(a_ptr->apply(x)));
    return out;
  };
  return system;
}

Tensor mesb_update(const Tensor& x_n, const Tensor& x0_hat_in, const Tensor& x_corrupt,
                   const Tensor& y, const LinearOperator& a, const SamplerConfig& config,
                   const NoiseSchedule& schedule, const TimeGrid& grid, std::size_t n) {
  if (std::isinf(config.k_y)) {
    fail_invalid("mesb_update requires finite k_y; the k_y = inf route is project_update");
  }
  return mesb_update_full(x_n, x0_hat_in, x_corrupt, y, a, config, schedule, grid, n).x0_new;
}

Tensor project_update(const Tensor& x0_hat_in, const Tensor& y, const LinearOperator& a,
                      std::size_t p) {
  return project_update_full(x0_hat_in, y, a, p).x0_new;
}

Tensor cddb_update(const Tensor& x0_hat_in, const Tensor& y, const LinearOperator& a,
                   double alpha) {
  if (!(alpha >= 0.0)) fail_invalid("cddb_update requires alpha >= 0");
  const Tensor residual = axpby(1.0, y, -1.0, a.apply(x0_hat_in));
  return axpby(1.0, x0_hat_in, alpha, a.adjoint(residual));
}

Tensor cddb_deep_update(const Tensor& x_n, double t_n, const Conditioning& cond,
                        const Denoiser& denoiser, const Tensor& y, const LinearOperator& a,
                        double alpha, const NoiseSchedule& schedule) {
  if (!denoiser.has_vjp()) {
    fail(ErrorKind::Capability, "cddb_deep_update requires a denoiser with a vjp");
  }
  const Tensor x0 = x0_hat(denoiser, x_n, t_n, cond, schedule);
  const Tensor residual = axpby(1.0, a.apply(x0), -1.0, y);
  const Tensor grad = denoiser.vjp(x_n, t_n, cond, scaled(2.0, a.adjoint(residual)));
  return axpby(1.0, x0, -alpha, grad);
}

namespace {

void validate_run(const Denoiser& denoiser, const TaskInputs& inputs,
                  const SamplerConfig& config) {
  if (config.steps < 1) fail_invalid("reverse run requires N >= 1");
  if (config.cg_iters < 1) fail_invalid("reverse run requires p >= 1");
  if (!(config.k_E >= 0.0)) fail_invalid("reverse run requires k_E >= 0");
  if (!(config.k_y >= 0.0)) fail_invalid("reverse run requires k_y >= 0");

  const bool needs_measurement =
      config.kind == SamplerKind::Project || config.kind == SamplerKind::Cddb ||
      config.kind == SamplerKind::CddbDeep ||
      (config.kind == SamplerKind::Mesb && (config.k_y > 0.0 || config.k_E > 0.0));
  if (needs_measurement && (!inputs.y.has_value() || !inputs.A)) {
    fail_invalid(sampler_kind_name(config.kind) + " run requires a measurement y and operator A");
  }
  if (inputs.A) {
    if (inputs.A->shape_in() != inputs.x_corrupt.shape()) {
      fail_invalid("operator input shape " + shape_to_string(inputs.A->shape_in()) +
                   " does not match x_corrupt shape " + shape_to_string(inputs.x_corrupt.shape()));
    }
    if (inputs.y && inputs.y->shape() != inputs.A->shape_out()) {
      fail_invalid("measurement shape " + shape_to_string(inputs.y->shape()) +
                   " does not match operator output shape " +
                   shape_to_string(inputs.A->shape_out()));
    }
  }
  if (config.kind == SamplerKind::CddbDeep && !denoiser.has_vjp()) {
    fail(ErrorKind::Capability, "cddb_deep requires a denoiser with a vjp");
  }
  if (config.kind == SamplerKind::Mesb && std::isinf(config.k_y) && config.t_gram) {
    fail_invalid("mesb with k_y = inf does not support a T operator");
  }
  if (config.t_gram && config.t_gram->shape_in() != inputs.x_corrupt.shape()) {
    fail_invalid("T operator shape does not match the image shape");
  }
}

}  // namespace

std::pair<Tensor, TrajectoryRecord> reverse_run(const Denoiser& denoiser,
                                                const TaskInputs& inputs,
                                                const SamplerConfig& config,
                                                const NoiseSchedule& schedule,
                                                const TimeGrid& grid) {
  validate_run(denoiser, inputs, config);
  if (grid.steps() != config.steps) {
    fail_invalid("time grid has " + std::to_string(grid.steps()) + " steps, config wants " +
                 std::to_string(config.steps));
  }

  const Conditioning cond{inputs.x_corrupt};
  SeededRng rng(config.seed);
  Tensor x = inputs.x_corrupt;

  TrajectoryRecord trajectory;
  trajectory.steps.reserve(config.steps);

  for (std::size_t n = config.steps; n >= 1; --n) {
    const double t_n = grid.times[n];
    StepRecord record;
    record.n = n;
    record.t_n = t_n;
    try {
      record.x0_hat = x0_hat(denoiser, x, t_n, cond, schedule);

      UpdateOutcome outcome{record.x0_hat, 0.0};
      switch (config.kind) {
        case SamplerKind::I2sb:
          break;
        case SamplerKind::Project:
          outcome = project_update_full(record.x0_hat, *inputs.y, *inputs.A, config.cg_iters);
          break;
        case SamplerKind::Cddb:
          outcome.x0_new = cddb_update(record.x0_hat, *inputs.y, *inputs.A, config.alpha);
          break;
        case SamplerKind::CddbDeep:
          outcome.x0_new = cddb_deep_update(x, t_n, cond, denoiser, *inputs.y, *inputs.A,
                                            config.alpha, schedule);
          break;
        case SamplerKind::Mesb:
          if (config.k_y == 0.0 && config.k_E == 0.0 && !config.t_gram) {
            break;  // degenerates to I2SB; skip the identity solve entirely
          }
          outcome = mesb_update_full(x, record.x0_hat, inputs.x_corrupt, *inputs.y, *inputs.A,
                                     config, schedule, grid, n);
          break;
      }
      record.x0_new = outcome.x0_new;
      record.cg_residual = outcome.cg_residual;
      if (inputs.A && inputs.y) {
        record.data_residual = norm2(axpby(1.0, inputs.A->apply(record.x0_new), -1.0, *inputs.y));
      }
      ensure_finite(record.x0_new, "reverse step");

      x = ddpm_posterior_sample(record.x0_new, x, n, grid, schedule, rng, config.stochastic);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " (reverse step n=" + std::to_string(n) + ")");
    }
    trajectory.steps.push_back(std::move(record));
  }

  trajectory.final_x0 = x;
  return {x, trajectory};
}

std::pair<Tensor, TrajectoryRecord> i2sb_reverse(const Denoiser& denoiser,
                                                 const Tensor& x_corrupt,
                                                 const SamplerConfig& config,
                                                 const NoiseSchedule& schedule,
                                                 const TimeGrid& grid) {
  if (config.kind != SamplerKind::I2sb) {
    fail_invalid("i2sb_reverse requires config.kind = i2sb");
  }
  return reverse_run(denoiser, TaskInputs{x_corrupt, std::nullopt, nullptr}, config, schedule,
                     grid);
}

}  // namespace mesb
