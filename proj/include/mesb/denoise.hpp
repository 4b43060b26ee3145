#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "mesb/rng.hpp"
#include "mesb/schedule.hpp"
#include "mesb/tensor.hpp"

namespace mesb {

/// Per-request context for a denoiser: the corrupted image the bridge ends
/// on. Passed explicitly so implementations stay stateless per request.
struct Conditioning {
  Tensor x_corrupt;
};

/// eps-predictor contract: deterministic, output shape equals input shape.
/// Implementations that can transpose the Jacobian of x_n -> x0_hat(x_n)
/// advertise has_vjp and implement vjp.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Tensor predict_eps(const Tensor& x_t, double t, const Conditioning& cond) const = 0;

  virtual bool has_vjp() const { return false; }

  /// J^T v for J = d x0_hat / d x_n evaluated at (x_n, t, cond).
  virtual Tensor vjp(const Tensor& x_n, double t, const Conditioning& cond,
                     const Tensor& v) const;
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

/// x0_hat = x_t - sigma_t * eps_hat. Rejects t = 0 (sigma_0 = 0 leaves the
/// prediction unconstrained; callers never query t = 0).
Tensor x0_hat(const Denoiser& denoiser, const Tensor& x_t, double t,
              const Conditioning& cond, const NoiseSchedule& schedule);

/// Exact posterior-mean denoiser for the prior X0 ~ N(mu0, s0sq I) under the
/// bridge forward kernel X_t | X0, X1 ~ N(a X0 + b X1, v I) with
///   a = sb2/(sb2+s2), b = s2/(sb2+s2), v = s2*sb2/(sb2+s2).
/// x0_hat equals E[X0 | X_t, X1]; the map is affine in X_t so the vjp is the
/// exact scalar multiple.
DenoiserPtr make_gaussian_analytic_denoiser(Tensor mu0, double s0sq,
                                            NoiseSchedule schedule);

/// Error-free regressor test double: eps_hat = (x_t - x0_true)/sigma_t, so
/// x0_hat is identically x0_true and the vjp is the zero map. Carries the
/// schedule because sigma_t is needed to form eps_hat.
DenoiserPtr make_oracle_denoiser(Tensor x0_true, NoiseSchedule schedule);

/// Monte-Carlo estimate of E || eps_hat(X_t,t) - (X_t - X0)/sigma_t || with
/// t drawn uniformly from `times` (default: the schedule's knot times
/// excluding t=0) and X_t drawn from the bridge forward kernel.
double bridge_matching_loss(const Denoiser& denoiser,
                            std::span<const std::pair<Tensor, Tensor>> pairs,
                            const NoiseSchedule& schedule, std::size_t n_draws,
                            SeededRng& rng, std::span<const double> times = {});

namespace detail {
/// Forward kernel coefficients of q(X_t | X0, X1): mean a*X0 + b*X1,
/// variance v per coordinate.
struct ForwardMoments {
  double a, b, v;
};
ForwardMoments forward_moments(const NoiseSchedule& schedule, double t);
}  // namespace detail

}  // namespace mesb
