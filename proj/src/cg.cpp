#include "mesb/cg.hpp"

#include <cmath>

#include "mesb/rng.hpp"

namespace mesb {

CgResult cg_solve(const SpdSystem& system, const Tensor& x0, std::size_t max_iters,
                  double residual_tol) {
  if (max_iters < 1) fail_invalid("cg_solve requires max_iters >= 1");
  if (!x0.same_shape(system.rhs)) {
    fail_invalid("cg_solve: x0 shape " + shape_to_string(x0.shape()) +
                 " does not match rhs shape " + shape_to_string(system.rhs.shape()));
  }

  CgResult result;
  result.x = x0;

  const double b_norm = norm2(system.rhs);
  const double stop_scale = b_norm > 0.0 ? b_norm : 1.0;

  Tensor r = axpby(1.0, system.rhs, -1.0, system.op(result.x));
  double rr = dot(r, r);
  result.final_residual = std::sqrt(rr) / stop_scale;
  if (result.final_residual <= residual_tol) return result;

  Tensor d = r;
  for (std::size_t k = 0; k < max_iters; ++k) {
    const Tensor q = system.op(d);
    const double dq = dot(d, q);
    if (!(dq > 0.0)) {
      fail(ErrorKind::OperatorContract,
           "cg_solve: <d, M d> = " + std::to_string(dq) + " at iterate " + std::to_string(k) +
           "; operator is not positive definite");
    }
    const double step = rr / dq;
    result.x = axpby(1.0, result.x, step, d);
    r = axpby(1.0, r, -step, q);
    const double rr_new = dot(r, r);
    result.iters = k + 1;
    result.final_residual = std::sqrt(rr_new) / stop_scale;
    result.residual_history.push_back(result.final_residual);
    if (result.final_residual <= residual_tol) break;
    d = axpby(1.0, r, rr_new / rr, d);
    rr = rr_new;
  }
  return result;
}

void check_spd_symmetry(const SpdSystem& system, const Shape& shape, std::uint64_t probe_seed) {
  SeededRng rng(probe_seed);
  const Tensor u = gaussian(shape, rng);
  const Tensor v = gaussian(shape, rng);
  const double left = dot(system.op(u), v);
  const double right = dot(u, system.op(v));
  const double scale = std::max({std::fabs(left), std::fabs(right), 1e-300});
  if (std::fabs(left - right) > 1e-8 * scale) {
    fail(ErrorKind::OperatorContract,
         "system operator fails the symmetry probe: <Mu,v>=" + std::to_string(left) +
         " vs <u,Mv>=" + std::to_string(right));
  }
}

}  // namespace mesb
