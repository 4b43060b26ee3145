#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mesb/tensor.hpp"

namespace mesb {

/// Matrix-free linear map with an explicit adjoint. Implementations are
/// immutable after construction; apply/adjoint are pure and shareable
/// across threads.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  const Shape& shape_in() const noexcept { return shape_in_; }
  const Shape& shape_out() const noexcept { return shape_out_; }
  std::size_t size_in() const { return shape_size(shape_in_); }
  std::size_t size_out() const { return shape_size(shape_out_); }

  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& y) const;

 protected:
  LinearOperator(Shape in, Shape out)
      : shape_in_(std::move(in)), shape_out_(std::move(out)) {}

  virtual Tensor do_apply(const Tensor& x) const = 0;
  virtual Tensor do_adjoint(const Tensor& y) const = 0;

 private:
  Shape shape_in_;
  Shape shape_out_;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// Ax = x.
OperatorPtr identity(Shape shape);

/// Periodic (circular) 2-D convolution with a normalized Gaussian kernel of
/// standard deviation kernel_sigma pixels. The kernel is the full-period
/// fold of the sampled Gaussian, so the operator is exactly self-adjoint and
/// obeys the semigroup law blur(s)∘blur(s) ≈ blur(s·sqrt(2)) to near machine
/// precision for s ≳ 1.
OperatorPtr gaussian_blur(const Shape& image_shape, double kernel_sigma);

/// Averages each factor x factor block; the adjoint spreads each measurement
/// uniformly scaled by 1/factor^2. Requires dims divisible by factor.
OperatorPtr block_downsample(const Shape& image_shape, std::size_t factor);

/// Replicates each source pixel into a factor x factor block.
OperatorPtr nearest_upsample(const Shape& small_shape, std::size_t factor);

/// Row selection: keeps the given flat pixel indices (in the given order).
/// The adjoint scatters measurements back and zero-fills the rest.
OperatorPtr mask(const Shape& image_shape, std::vector<std::size_t> kept_indices);

/// Parallel-beam line integrals of an image_size x image_size image at
/// n_views equally spaced angles in [0, pi), bilinear interpolation along
/// rays sampled at half-pixel steps. The adjoint transposes the discretized
/// stencil weight-for-weight (unfiltered backprojection).
/// n_detectors == 0 picks image_size detectors at unit spacing.
OperatorPtr toy_radon(std::size_t image_size, std::size_t n_views,
                      std::size_t n_detectors = 0);

/// The Gram operator G = T^T T = -0.5 * (periodic 5-point discrete
/// Laplacian): symmetric positive semidefinite, annihilates constants.
/// T itself is never materialized.
OperatorPtr laplacian_gram(const Shape& image_shape);

/// s * A.
OperatorPtr scaled_operator(OperatorPtr a, double s);

/// A^T A as a square operator on shape_in.
OperatorPtr gram_operator(OperatorPtr a);

/// Estimates alpha0 such that A = alpha0 * A A^T A and verifies
/// ||A x - alpha0 A A^T A x|| <= tolerance * ||A x|| on n_probes seeded
/// random probes. Returns alpha0 on success, nothing when A is not a scaled
/// partial isometry.
std::optional<double> partial_isometry_check(const LinearOperator& a,
                                             double tolerance,
                                             int n_probes = 32,
                                             std::uint64_t probe_seed = 0x9d2c5680);

}  // namespace mesb
