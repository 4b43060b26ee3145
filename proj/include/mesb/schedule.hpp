#pragma once

#include <cstddef>
#include <vector>

#include "mesb/error.hpp"

namespace mesb {

/// Diffusion speed profile beta(t) tabulated on a uniform grid over [0,1],
/// with prefix integrals so the accumulated variances
///   sigma2(t)     = int_0^t beta
///   sigma_bar2(t) = int_t^1 beta
/// come from one trapezoid table. sigma2 + sigma_bar2 telescopes to
/// sigma2(1) exactly by construction.
class NoiseSchedule {
public:
  /// Triangular symmetric profile: beta rises linearly from beta_min at t=0
  /// to beta_max at t=0.5 and falls back to beta_min at t=1, so
  /// beta(t) == beta(1-t).
  static NoiseSchedule symmetric_beta(double beta_min, double beta_max,
                                      std::size_t n_base = 1000);

  /// Arbitrary beta samples on the uniform knots t_i = i/(len-1). Requires
  /// beta >= 0 everywhere (the symmetric constructor guarantees strict
  /// positivity on (0,1); this relaxed entry point exists for frozen or
  /// experimental profiles).
  static NoiseSchedule from_beta_samples(std::vector<double> beta_samples);

  double beta(double t) const;        // linear interpolation of the table
  double sigma2(double t) const;      // prefix integral, linear between knots
  double sigma_bar2(double t) const;  // sigma2(1) - sigma2(t)
  double alpha2(double t_a, double t_b) const;  // int_{t_a}^{t_b} beta
  double total_variance() const { return cum_.back(); }  // sigma2(1)

  std::size_t n_base() const { return beta_.size() - 1; }
  /// Knot times t_i = i/n_base, i = 0..n_base.
  std::vector<double> knot_times() const;

private:
  NoiseSchedule() = default;

  std::vector<double> beta_;  // n_base + 1 samples
  std::vector<double> cum_;   // trapezoid prefix integral at the knots
  double h_ = 0.0;
};

/// Discrete generative times t_0 = 0 < t_1 < ... < t_N = 1.
struct TimeGrid {
  std::vector<double> times;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }

  /// t_n = (n/N)^2: step density highest near t=0 (the clean end), which is
  /// where reverse sampling refines. Pass dense_near_one to flip the
  /// convention: t_n = 1 - ((N-n)/N)^2.
  static TimeGrid quadratic(std::size_t n_steps, bool dense_near_one = false);
};

}  // namespace mesb
