#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mesb/cg.hpp"
#include "mesb/denoise.hpp"
#include "mesb/linop.hpp"
#include "mesb/rng.hpp"
#include "mesb/schedule.hpp"

namespace mesb {

enum class SamplerKind { I2sb, Project, Cddb, CddbDeep, Mesb };

std::string sampler_kind_name(SamplerKind kind);
SamplerKind sampler_kind_from_name(const std::string& name);

/// Reverse-sampler configuration. Only the fields relevant to `kind` are
/// honored:
///   I2sb:     steps, stochastic, seed
///   Project:  + cg_iters
///   Cddb:     + alpha
///   CddbDeep: + alpha (denoiser must provide a vjp)
///   Mesb:     + cg_iters, k_y, k_E, t_gram
/// k_y may be +infinity, which dispatches to the exact-projection route
/// (t_gram must then be empty). k_E scales the per-step extrapolation weight
/// k_e = k_E * sigma_n^2 * sigma_bar_n^2 / sigma_N^4.
struct SamplerConfig {
  SamplerKind kind = SamplerKind::I2sb;
  std::size_t steps = 10;     // N
  std::size_t cg_iters = 5;   // p
  double k_y = 0.0;
  double k_E = 0.0;
  OperatorPtr t_gram;         // T^T T; empty means T = 0
  double alpha = 1.0;
  bool stochastic = true;
  std::uint64_t seed = 0;
  bool dense_near_one = false;  // time-grid direction convention
};

/// CDDB-deep step length implied by a measurement noise level sigma^2 under
/// the Gaussian measurement assumption: alpha = sigma_t^2 / (2 sigma^2).
inline double cddb_deep_alpha(double sigma_t2, double sigma2) {
  return sigma_t2 / (2.0 * sigma2);
}

struct StepRecord {
  std::size_t n = 0;
  double t_n = 0.0;
  Tensor x0_hat;
  Tensor x0_new;
  double cg_residual = 0.0;    // relative residual of the per-step solve (0 when no solve ran)
  double data_residual = 0.0;  // ||A x0_new - y|| (0 when the run has no measurement)
};

struct TrajectoryRecord {
  std::vector<StepRecord> steps;
  Tensor final_x0;
};

/// Measurement context for a reverse run. y and A may be absent for plain
/// bridge sampling (I2SB); every data-consistent sampler requires both.
struct TaskInputs {
  Tensor x_corrupt;
  std::optional<Tensor> y;
  OperatorPtr A;
};

/// Draw from q(X_t | X0, X1): mean (sb2*x0 + s2*x1)/(sb2+s2), variance
/// s2*sb2/(sb2+s2) per coordinate. Requires 0 < t < 1.
Tensor forward_sample(const Tensor& x0, const Tensor& x1, double t,
                      const NoiseSchedule& schedule, SeededRng& rng);

/// Draw X_{n-1} from the posterior p(X_{n-1} | x0_in, x_n): mean
/// (a2*x0_in + s2_prev*x_n)/(a2+s2_prev) with a2 the variance accumulated
/// over (t_{n-1}, t_n) and s2_prev = sigma2(t_{n-1}); the noise term is
/// added only when stochastic. At n=1, sigma2(0)=0 collapses the posterior
/// and x0_in is returned exactly (no draw consumed).
Tensor ddpm_posterior_sample(const Tensor& x0_in, const Tensor& x_n, std::size_t n,
                             const TimeGrid& grid, const NoiseSchedule& schedule,
                             SeededRng& rng, bool stochastic);

/// Plain bridge reverse process from x_corrupt (no measurement).
std::pair<Tensor, TrajectoryRecord> i2sb_reverse(const Denoiser& denoiser,
                                                 const Tensor& x_corrupt,
                                                 const SamplerConfig& config,
                                                 const NoiseSchedule& schedule,
                                                 const TimeGrid& grid);

/// Data-consistent replacement of x0_hat: the cg_iters-step CG solve,
/// started at x0_hat, of
///   [(1 + k_e) I + T^T T + k_y A^T A] X
///       = (I + T^T T) x0_hat + k_e X_{0,e} + k_y A^T y
/// with X_{0,e} = (sigma_N^2/sigma_bar_n^2) x_n -
/// (sigma_n^2/sigma_bar_n^2) x_corrupt. At n = N, sigma_bar_N = 0 makes
/// X_{0,e} singular; the limit value x_corrupt is substituted (its weight
/// k_e is 0 there). Requires finite k_y; the k_y = inf route is
/// project_update.
Tensor mesb_update(const Tensor& x_n, const Tensor& x0_hat_in, const Tensor& x_corrupt,
                   const Tensor& y, const LinearOperator& a, const SamplerConfig& config,
                   const NoiseSchedule& schedule, const TimeGrid& grid, std::size_t n);

/// Projection of x0_hat onto {A X = y}: x0_hat + A^T z with z the p-step CG
/// solve of (A A^T) z = y - A x0_hat from z = 0. Exact in one step for
/// partial isometries; the k_y -> inf limit of mesb_update with k_E = 0,
/// T = 0.
Tensor project_update(const Tensor& x0_hat_in, const Tensor& y, const LinearOperator& a,
                      std::size_t p);

/// Single gradient step on the data term: x0_hat + alpha A^T (y - A x0_hat).
Tensor cddb_update(const Tensor& x0_hat_in, const Tensor& y, const LinearOperator& a,
                   double alpha);

/// Gradient step through the denoiser: x0_hat - alpha * J^T 2 A^T (A x0_hat - y)
/// where J is the Jacobian of x_n -> x0_hat(x_n). Requires denoiser.has_vjp().
Tensor cddb_deep_update(const Tensor& x_n, double t_n, const Conditioning& cond,
                        const Denoiser& denoiser, const Tensor& y, const LinearOperator& a,
                        double alpha, const NoiseSchedule& schedule);

/// Full reverse run dispatching on config.kind; X_N = x_corrupt, then per
/// step: x0_hat -> kind-specific x0_new -> posterior draw.
std::pair<Tensor, TrajectoryRecord> reverse_run(const Denoiser& denoiser,
                                                const TaskInputs& inputs,
                                                const SamplerConfig& config,
                                                const NoiseSchedule& schedule,
                                                const TimeGrid& grid);

/// Normal-equation system behind mesb_update with the per-step weight k_e
/// given explicitly. Exposed so tests can cross-check the two algebraic
/// formulations of the update.
SpdSystem mesb_normal_system(const Tensor& x0_hat_in, const Tensor* x0_e, double k_e,
                             const Tensor& y, const LinearOperator& a, double k_y,
                             const LinearOperator* t_gram);

}  // namespace mesb
