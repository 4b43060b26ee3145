#pragma once

#include <cstdint>
#include <vector>

#include "mesb/linop.hpp"
#include "mesb/schedule.hpp"
#include "mesb/tensor.hpp"

namespace mesb {

/// Space-time sampling plan for the PDE residual checks. Time samples are
/// snapped to the schedule's knot times (where the tabulated integrals are
/// exact for piecewise-linear beta), with stride knot_step at the coarsest
/// level, halved per refinement. knot_step must be divisible by
/// 2^(levels-1).
struct PdeGridSpec {
  double x_half_width = 2.0;
  std::size_t n_x = 33;       // coarsest spatial sample count, refined 2x per level
  double t_min = 0.1;
  double t_max = 0.9;
  std::size_t knot_step = 32;
  int levels = 3;
};

struct PdeResidualReport {
  std::vector<double> h_x;            // per level
  std::vector<double> h_t;            // per level
  std::vector<double> max_residual;   // per level
  double order = 0.0;                 // mean observed convergence order
};

/// Residual of d_t logPsi + 0.5 beta (d_xx logPsi + (d_x logPsi)^2) for
/// logPsi(x,t) = log N(x; x_corrupt, sigma_bar_t^2), central differences on
/// a refined space-time grid. Order ~2 expected.
PdeResidualReport psi_pde_residual(double x_corrupt, const NoiseSchedule& schedule,
                                   const PdeGridSpec& spec = {});

/// Same machinery for the component potential log(C N(x; x0, sigma_t^2))
/// with the opposite-sign heat equation; the additive constant log_c cancels
/// in the residual.
PdeResidualReport psi_hat_component_pde_residual(double x0, const NoiseSchedule& schedule,
                                                 const PdeGridSpec& spec = {},
                                                 double log_c = 0.0);

/// Compares the closed-form -(x - x_corrupt)/sigma_bar_t^2 against central
/// finite differences of log N(x; x_corrupt, sigma_bar_t^2 I) at 16 seeded
/// random points; returns the max relative error.
double grad_log_psi_check(const Tensor& x_corrupt, double t, const NoiseSchedule& schedule,
                          double fd_step = 1e-5, std::uint64_t probe_seed = 117);

struct Theorem2Result {
  Tensor cddb;
  Tensor dense_minimizer;
  double discrepancy = 0.0;  // ||cddb - dense|| / ||dense||
  double alpha0 = 0.0;
};

/// For A a scaled partial isometry with full row rank, verifies that the
/// single gradient step with alpha = alpha0 k / (alpha0 + k) solves
/// min ||X - x0_hat||^2 + k ||A X - y||^2 exactly, against a dense
/// normal-equation solve. Throws ErrorKind::InvalidArgument naming the
/// failed precondition otherwise. Dense work limits size_in to 256.
Theorem2Result theorem2_check(const LinearOperator& a, double k, const Tensor& x0_hat,
                              const Tensor& y);

struct EquivalenceReport {
  double max_discrepancy = 0.0;
  int instances = 0;
};

/// Cross-checks the two forms of the per-step linear system on random dense
/// instances: the direct M_t form parameterized by (sigma_X^2, sigma_y^2,
/// Sigma_X^-1 = (I + T^T T)/sigma_X^2) against the normal equations in
/// (k_y, k_e, T). Both are dense-solved; returns the worst relative
/// solution discrepancy.
EquivalenceReport mesb_equivalence_check(int n_instances = 10, std::uint64_t seed = 20240612);

}  // namespace mesb
