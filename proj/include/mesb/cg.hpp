#pragma once

#include <functional>
#include <vector>

#include "mesb/tensor.hpp"

namespace mesb {

/// Symmetric positive definite system M x = b given as a matrix-free apply.
struct SpdSystem {
  std::function<Tensor(const Tensor&)> op;
  Tensor rhs;
};

struct CgResult {
  Tensor x;
  std::size_t iters = 0;
  double final_residual = 0.0;             // relative to ||rhs||
  std::vector<double> residual_history;    // relative residual after each iteration
};

/// Plain conjugate gradients from x0, capped at max_iters, early stop when
/// the relative residual drops to residual_tol. Deterministic: same inputs
/// give bit-identical iterates. Throws ErrorKind::OperatorContract naming
/// the iterate if <d, M d> <= 0 shows the operator is not SPD.
CgResult cg_solve(const SpdSystem& system, const Tensor& x0, std::size_t max_iters,
                  double residual_tol = 1e-10);

/// Probes the system operator for symmetry on a seeded random pair; throws
/// ErrorKind::OperatorContract on failure. Relative tolerance 1e-8.
void check_spd_symmetry(const SpdSystem& system, const Shape& shape,
                        std::uint64_t probe_seed = 0x51ab1e);

}  // namespace mesb
