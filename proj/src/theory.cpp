#include "mesb/theory.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "mesb/rng.hpp"
#include "mesb/samplers.hpp"

namespace mesb {

namespace {

// log N(x; c, var) in one dimension.
double log_normal_1d(double x, double c, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - (x - c) * (x - c) / (2.0 * var);
}

void validate_spec(const PdeGridSpec& spec) {
  if (!(spec.t_min > 0.0 && spec.t_max < 1.0 && spec.t_min < spec.t_max)) {
    fail_invalid("PDE grid requires 0 < t_min < t_max < 1 (endpoints excluded)");
  }
  if (spec.levels < 3) fail_invalid("PDE residual needs >= 3 refinement levels");
  if (spec.n_x < 5) fail_invalid("PDE grid requires n_x >= 5");
  const std::size_t div = std::size_t{1} << (spec.levels - 1);
  if (spec.knot_step % div != 0 || spec.knot_step / div == 0) {
    fail_invalid("knot_step must be divisible by 2^(levels-1) with a nonzero quotient");
  }
}

// Shared residual sweep. Sign +1 checks d_t L = -0.5 beta (L_xx + L_x^2)
// (the backward potential); sign -1 checks d_t L = +0.5 beta (...) (the
// forward component). `variance(t)` supplies sigma_bar^2 or sigma^2.
//
// Every refinement level evaluates the residual at the SAME (x, t) sample
// points and only shrinks the stencil steps, so the observed decay isolates
// the truncation order. Time samples and stencil offsets sit on schedule
// knots, where the tabulated integrals are exact for piecewise-linear beta.
template <typename VarianceFn>
PdeResidualReport pde_residual_sweep(double center, const NoiseSchedule& schedule,
                                     const PdeGridSpec& spec, double sign, double log_c,
                                     VarianceFn&& variance) {
  validate_spec(spec);
  const std::size_t n_base = schedule.n_base();
  const double h_knot = 1.0 / static_cast<double>(n_base);

  const auto k_lo = static_cast<std::size_t>(std::ceil(spec.t_min * n_base));
  const auto k_hi = static_cast<std::size_t>(std::floor(spec.t_max * n_base));
  if (k_lo < spec.knot_step || k_hi + spec.knot_step > n_base) {
    fail_invalid("t range too close to the endpoints for the requested knot_step");
  }

  const auto L = [&](double x, double tk) {
    return log_c + log_normal_1d(x, center, variance(tk));
  };

  const double h_x0 = 2.0 * spec.x_half_width / static_cast<double>(spec.n_x - 1);

  PdeResidualReport report;
  for (int level = 0; level < spec.levels; ++level) {
    const std::size_t step = spec.knot_step >> level;
    const double h_t = static_cast<double>(step) * h_knot;
    const double h_x = h_x0 / static_cast<double>(std::size_t{1} << level);

    double worst = 0.0;
    for (std::size_t k = k_lo + spec.knot_step; k + spec.knot_step <= k_hi;
         k += spec.knot_step) {
      const double t = static_cast<double>(k) * h_knot;
      const double t_plus = static_cast<double>(k + step) * h_knot;
      const double t_minus = static_cast<double>(k - step) * h_knot;
      const double beta_t = schedule.beta(t);
      for (std::size_t i = 0; i < spec.n_x; ++i) {
        const double x = center - spec.x_half_width + static_cast<double>(i) * h_x0;
        const double l0 = L(x, t);
        const double lt = (L(x, t_plus) - L(x, t_minus)) / (2.0 * h_t);
        const double lx = (L(x + h_x, t) - L(x - h_x, t)) / (2.0 * h_x);
        const double lxx = (L(x + h_x, t) - 2.0 * l0 + L(x - h_x, t)) / (h_x * h_x);
        const double residual = lt + sign * 0.5 * beta_t * (lxx + lx * lx);
        worst = std::max(worst, std::fabs(residual));
      }
    }
    report.h_x.push_back(h_x);
    report.h_t.push_back(h_t);
    report.max_residual.push_back(worst);
  }

  double order_sum = 0.0;
  for (std::size_t i = 0; i + 1 < report.max_residual.size(); ++i) {
    order_sum += std::log2(report.max_residual[i] / report.max_residual[i + 1]);
  }
  report.order = order_sum / static_cast<double>(report.max_residual.size() - 1);
  return report;
}

}  // namespace

PdeResidualReport psi_pde_residual(double x_corrupt, const NoiseSchedule& schedule,
                                   const PdeGridSpec& spec) {
  return pde_residual_sweep(x_corrupt, schedule, spec, +1.0, 0.0,
                            [&](double t) { return schedule.sigma_bar2(t); });
}

PdeResidualReport psi_hat_component_pde_residual(double x0, const NoiseSchedule& schedule,
                                                 const PdeGridSpec& spec, double log_c) {
  return pde_residual_sweep(x0, schedule, spec, -1.0, log_c,
                            [&](double t) { return schedule.sigma2(t); });
}

double grad_log_psi_check(const Tensor& x_corrupt, double t, const NoiseSchedule& schedule,
                          double fd_step, std::uint64_t probe_seed) {
  if (!(t > 0.0 && t < 1.0)) fail_invalid("grad_log_psi_check requires t in (0,1)");
  const double var = schedule.sigma_bar2(t);
  SeededRng rng(probe_seed);
  double worst = 0.0;
  for (int probe = 0; probe < 16; ++probe) {
    const Tensor x = axpby(1.0, x_corrupt, 1.0, gaussian(x_corrupt.shape(), rng));
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double analytic = -(x[j] - x_corrupt[j]) / var;
      const double fd = (log_normal_1d(x[j] + fd_step, x_corrupt[j], var) -
                         log_normal_1d(x[j] - fd_step, x_corrupt[j], var)) /
                        (2.0 * fd_step);
      const double scale = std::max(std::fabs(analytic), 1e-12);
      worst = std::max(worst, std::fabs(fd - analytic) / scale);
    }
  }
  return worst;
}

namespace {

Eigen::MatrixXd dense_from_operator(const LinearOperator& a) {
  const std::size_t n = a.size_in();
  const std::size_t m = a.size_out();
  Eigen::MatrixXd mat(m, n);
  Tensor e = Tensor::zeros(a.shape_in());
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Tensor col = a.apply(e);
    for (std::size_t i = 0; i < m; ++i) mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0.0;
  }
  return mat;
}

Eigen::VectorXd to_eigen(const Tensor& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = t[i];
  return v;
}

}  // namespace

Theorem2Result theorem2_check(const LinearOperator& a, double k, const Tensor& x0_hat,
                              const Tensor& y) {
  if (!(k > 0.0)) fail_invalid("theorem2_check requires k > 0");
  if (a.size_in() > 256) {
    fail_invalid("theorem2_check: dense verification limited to 256 unknowns, got " +
                 std::to_string(a.size_in()));
  }
  const auto alpha0 = partial_isometry_check(a, 1e-6);
  if (!alpha0) {
    fail_invalid("theorem2_check precondition failed: A is not a scaled partial isometry");
  }

  const Eigen::MatrixXd dense_a = dense_from_operator(a);
  {
    // Row full rank: the Gram A A^T must be nonsingular.
    const Eigen::MatrixXd gram = dense_a * dense_a.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-10 * std::max(hi, 1.0))) {
      fail_invalid("theorem2_check precondition failed: A is not row full rank");
    }
  }

  Theorem2Result result;
  result.alpha0 = *alpha0;
  const double alpha = (*alpha0) * k / (*alpha0 + k);
  result.cddb = cddb_update(x0_hat, y, a, alpha);

  const Eigen::Index n = dense_a.cols();
  const Eigen::MatrixXd normal =
      Eigen::MatrixXd::Identity(n, n) + k * dense_a.transpose() * dense_a;
  const Eigen::VectorXd rhs = to_eigen(x0_hat) + k * dense_a.transpose() * to_eigen(y);
  const Eigen::VectorXd solution = normal.llt().solve(rhs);

  result.dense_minimizer = Tensor::zeros(x0_hat.shape());
  for (std::size_t i = 0; i < x0_hat.size(); ++i) {
    result.dense_minimizer[i] = solution(static_cast<Eigen::Index>(i));
  }
  result.discrepancy = norm2(axpby(1.0, result.cddb, -1.0, result.dense_minimizer)) /
                       std::max(norm2(result.dense_minimizer), 1e-300);
  return result;
}

EquivalenceReport mesb_equivalence_check(int n_instances, std::uint64_t seed) {
  if (n_instances < 1) fail_invalid("mesb_equivalence_check requires n_instances >= 1");
  SeededRng rng(seed);
  const NoiseSchedule schedule = NoiseSchedule::symmetric_beta(1e-4, 0.15);
  const double total2 = schedule.total_variance();

  EquivalenceReport report;
  report.instances = n_instances;
  for (int inst = 0; inst < n_instances; ++inst) {
    const Eigen::Index d = 16 + static_cast<Eigen::Index>(rng.uniform() * 49.0);  // 16..64
    const Eigen::Index m = std::max<Eigen::Index>(4, d / 2);

    Eigen::MatrixXd a(m, d), t_mat(d, d);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.normal() / std::sqrt(double(d));
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) t_mat(i, j) = 0.3 * rng.normal();
    }
    const Eigen::MatrixXd gram_t = t_mat.transpose() * t_mat;

    const double sigma_x2 = 0.2 + 1.8 * rng.uniform();
    const double sigma_y2 = 0.2 + 1.8 * rng.uniform();
    const double t_n = 0.15 + 0.7 * rng.uniform();
    const double s2_n = schedule.sigma2(t_n);
    const double sb2_n = schedule.sigma_bar2(t_n);

    Eigen::VectorXd x_n(d), x_corrupt(d), x0_hat(d);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < d; ++i) {
      x_n(i) = rng.normal();
      x_corrupt(i) = rng.normal();
      x0_hat(i) = rng.normal();
    }
    for (Eigen::Index i = 0; i < m; ++i) y(i) = rng.normal();

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd sigma_x_inv = (eye + gram_t) / sigma_x2;

    // Direct form: M_t X = (X_n - (s2/S2) X_corrupt) + s2 SigmaX^-1 x0_hat
    //                      + (s2/sy2) A^T y
    const Eigen::MatrixXd m_t =
        (1.0 - s2_n / total2) * eye + s2_n * sigma_x_inv + (s2_n / sigma_y2) * a.transpose() * a;
    const Eigen::VectorXd rhs_direct = (x_n - (s2_n / total2) * x_corrupt) +
                                       s2_n * sigma_x_inv * x0_hat +
                                       (s2_n / sigma_y2) * a.transpose() * y;
    const Eigen::VectorXd sol_direct = m_t.ldlt().solve(rhs_direct);

    // Normal-equation form in (k_y, k_e, T).
    const double k_y = sigma_x2 / sigma_y2;
    const double k_e = sb2_n * sigma_x2 / (s2_n * total2);
    const Eigen::VectorXd x0_e = (total2 / sb2_n) * x_n - (s2_n / sb2_n) * x_corrupt;
    const Eigen::MatrixXd m_opt = (1.0 + k_e) * eye + gram_t + k_y * a.transpose() * a;
    const Eigen::VectorXd rhs_opt =
        (eye + gram_t) * x0_hat + k_e * x0_e + k_y * a.transpose() * y;
    const Eigen::VectorXd sol_opt = m_opt.ldlt().solve(rhs_opt);

    const double diff = (sol_direct - sol_opt).norm() / std::max(sol_opt.norm(), 1e-300);
    report.max_discrepancy = std::max(report.max_discrepancy, diff);
  }
  return report;
}

}  // namespace mesb
