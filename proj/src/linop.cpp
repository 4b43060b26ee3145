#include "mesb/linop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "mesb/rng.hpp"

namespace mesb {

Tensor LinearOperator::apply(const Tensor& x) const {
  if (x.shape() != shape_in_) {
    fail_invalid("operator apply: expected shape " + shape_to_string(shape_in_) +
                 ", got " + shape_to_string(x.shape()));
  }
  return do_apply(x);
}

Tensor LinearOperator::adjoint(const Tensor& y) const {
  if (y.shape() != shape_out_) {
    fail_invalid("operator adjoint: expected shape " + shape_to_string(shape_out_) +
                 ", got " + shape_to_string(y.shape()));
  }
  return do_adjoint(y);
}

namespace {

void require_2d(const Shape& shape, const char* what) {
  if (shape.size() != 2) {
    fail_invalid(std::string(what) + " requires a 2-D shape, got " + shape_to_string(shape));
  }
}

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Shape shape) : LinearOperator(shape, shape) {}
  Tensor do_apply(const Tensor& x) const override { return x; }
  Tensor do_adjoint(const Tensor& y) const override { return y; }
};

// Full-period folded Gaussian kernel of length n: k[i] = sum_m g(i + m*n),
// normalized to sum 1. Folding makes periodic convolution match the exact
// (untruncated) Gaussian, which is what keeps the semigroup law tight.
std::vector<double> folded_gaussian_kernel(std::size_t n, double sigma) {
  std::vector<double> kernel(n, 0.0);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const long wraps = static_cast<long>(std::ceil(12.0 * sigma / static_cast<double>(n))) + 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (long m = -wraps; m <= wraps; ++m) {
      // distance of i to 0 modulo n, shifted by whole periods
      const double d = static_cast<double>(i) + static_cast<double>(m) * static_cast<double>(n);
      v += std::exp(-d * d * inv2s2);
    }
    kernel[i] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;
  return kernel;
}

class GaussianBlurOperator final : public LinearOperator {
 public:
  GaussianBlurOperator(const Shape& shape, double sigma)
      : LinearOperator(shape, shape),
        kernel_rows_(folded_gaussian_kernel(shape[0], sigma)),
        kernel_cols_(folded_gaussian_kernel(shape[1], sigma)) {}

  Tensor do_apply(const Tensor& x) const override { return convolve(x); }
  // Symmetric kernel with periodic wrap: self-adjoint.
  Tensor do_adjoint(const Tensor& y) const override { return convolve(y); }

 private:
  Tensor convolve(const Tensor& x) const {
    const std::size_t rows = shape_in()[0];
    const std::size_t cols = shape_in()[1];
    // rows pass
    Tensor tmp = Tensor::zeros(x.shape());
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
          acc += kernel_rows_[k] * x.at((r + rows - k) % rows, c);
        }
        tmp.at(r, c) = acc;
      }
    }
    // cols pass
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < cols; ++k) {
          acc += kernel_cols_[k] * tmp.at(r, (c + cols - k) % cols);
        }
        out.at(r, c) = acc;
      }
    }
    return out;
  }

  std::vector<double> kernel_rows_;
  std::vector<double> kernel_cols_;
};

class BlockDownsampleOperator final : public LinearOperator {
 public:
  BlockDownsampleOperator(const Shape& shape, std::size_t factor)
      : LinearOperator(shape, {shape[0] / factor, shape[1] / factor}), factor_(factor) {}

  Tensor do_apply(const Tensor& x) const override {
    const std::size_t out_rows = shape_out()[0];
    const std::size_t out_cols = shape_out()[1];
    const double inv = 1.0 / static_cast<double>(factor_ * factor_);
    Tensor out = Tensor::zeros(shape_out());
    for (std::size_t r = 0; r < out_rows; ++r) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < factor_; ++i) {
          for (std::size_t j = 0; j < factor_; ++j) {
            acc += x.at(r * factor_ + i, c * factor_ + j);
          }
        }
        out.at(r, c) = acc * inv;
      }
    }
    return out;
  }

  Tensor do_adjoint(const Tensor& y) const override {
    const double inv = 1.0 / static_cast<double>(factor_ * factor_);
    Tensor out = Tensor::zeros(shape_in());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t c = 0; c < y.cols(); ++c) {
        const double v = y.at(r, c) * inv;
        for (std::size_t i = 0; i < factor_; ++i) {
          for (std::size_t j = 0; j < factor_; ++j) {
            out.at(r * factor_ + i, c * factor_ + j) = v;
          }
        }
      }
    }
    return out;
  }

 private:
  std::size_t factor_;
};

class NearestUpsampleOperator final : public LinearOperator {
 public:
  NearestUpsampleOperator(const Shape& small, std::size_t factor)
      : LinearOperator(small, {small[0] * factor, small[1] * factor}), factor_(factor) {}

  Tensor do_apply(const Tensor& x) const override {
    Tensor out = Tensor::zeros(shape_out());
    for (std::size_t r = 0; r < shape_out()[0]; ++r) {
      for (std::size_t c = 0; c < shape_out()[1]; ++c) {
        out.at(r, c) = x.at(r / factor_, c / factor_);
      }
    }
    return out;
  }

  Tensor do_adjoint(const Tensor& y) const override {
    Tensor out = Tensor::zeros(shape_in());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t c = 0; c < y.cols(); ++c) {
        out.at(r / factor_, c / factor_) += y.at(r, c);
      }
    }
    return out;
  }

 private:
  std::size_t factor_;
};

class MaskOperator final : public LinearOperator {
 public:
  MaskOperator(const Shape& shape, std::vector<std::size_t> kept)
      : LinearOperator(shape, {kept.size()}), kept_(std::move(kept)) {}

  Tensor do_apply(const Tensor& x) const override {
    Tensor out = Tensor::zeros(shape_out());
    for (std::size_t i = 0; i < kept_.size(); ++i) out[i] = x[kept_[i]];
    return out;
  }

  Tensor do_adjoint(const Tensor& y) const override {
    Tensor out = Tensor::zeros(shape_in());
    for (std::size_t i = 0; i < kept_.size(); ++i) out[kept_[i]] = y[i];
    return out;
  }

 private:
  std::vector<std::size_t> kept_;
};

// Shared ray stencil walk: calls visit(flat_sino_index, flat_pixel_index, w)
// for every bilinear weight. apply and adjoint traverse identical weights,
// making the adjoint an exact transpose.
class ToyRadonOperator final : public LinearOperator {
 public:
  ToyRadonOperator(std::size_t n, std::size_t views, std::size_t dets)
      : LinearOperator({n, n}, {views, dets}), n_(n), views_(views), dets_(dets) {}

  Tensor do_apply(const Tensor& x) const override {
    Tensor out = Tensor::zeros(shape_out());
    walk([&](std::size_t ray, std::size_t pix, double w) { out[ray] += w * x[pix]; });
    return out;
  }

  Tensor do_adjoint(const Tensor& y) const override {
    Tensor out = Tensor::zeros(shape_in());
    walk([&](std::size_t ray, std::size_t pix, double w) { out[pix] += w * y[ray]; });
    return out;
  }

 private:
  template <typename Visit>
  void walk(Visit&& visit) const {
    const double center = 0.5 * static_cast<double>(n_ - 1);
    const double det_center = 0.5 * static_cast<double>(dets_ - 1);
    const double step = 0.5;  // half-pixel sampling along the ray
    const double half_span = 0.75 * static_cast<double>(n_);
    const long n_samples = static_cast<long>(std::floor(half_span / step));
    for (std::size_t v = 0; v < views_; ++v) {
      const double theta = std::numbers::pi * static_cast<double>(v) / static_cast<double>(views_);
      const double ux = std::cos(theta), uy = std::sin(theta);   // ray direction
      const double wx = -uy, wy = ux;                            // detector axis
      for (std::size_t d = 0; d < dets_; ++d) {
        const std::size_t ray = v * dets_ + d;
        const double s = static_cast<double>(d) - det_center;
        for (long q = -n_samples; q <= n_samples; ++q) {
          const double tau = static_cast<double>(q) * step;
          const double px = s * wx + tau * ux + center;
          const double py = s * wy + tau * uy + center;
          if (px < 0.0 || py < 0.0) continue;
          const auto c0 = static_cast<std::size_t>(px);
          const auto r0 = static_cast<std::size_t>(py);
          if (c0 + 1 >= n_ || r0 + 1 >= n_) continue;
          const double fc = px - static_cast<double>(c0);
          const double fr = py - static_cast<double>(r0);
          visit(ray, r0 * n_ + c0, step * (1.0 - fr) * (1.0 - fc));
          visit(ray, r0 * n_ + c0 + 1, step * (1.0 - fr) * fc);
          visit(ray, (r0 + 1) * n_ + c0, step * fr * (1.0 - fc));
          visit(ray, (r0 + 1) * n_ + c0 + 1, step * fr * fc);
        }
      }
    }
  }

  std::size_t n_, views_, dets_;
};

class LaplacianGramOperator final : public LinearOperator {
 public:
  explicit LaplacianGramOperator(const Shape& shape) : LinearOperator(shape, shape) {}

  Tensor do_apply(const Tensor& x) const override {
    const std::size_t rows = shape_in()[0];
    const std::size_t cols = shape_in()[1];
    Tensor out = Tensor::zeros(shape_in());
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t rm = (r + rows - 1) % rows;
      const std::size_t rp = (r + 1) % rows;
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t cm = (c + cols - 1) % cols;
        const std::size_t cp = (c + 1) % cols;
        // -0.5 * (5-point Laplacian), periodic wrap
        out.at(r, c) = -0.5 * (x.at(rm, c) + x.at(rp, c) + x.at(r, cm) + x.at(r, cp) -
                               4.0 * x.at(r, c));
      }
    }
    return out;
  }

  Tensor do_adjoint(const Tensor& y) const override { return do_apply(y); }
};

class ScaledOperator final : public LinearOperator {
 public:
  ScaledOperator(OperatorPtr a, double s)
      : LinearOperator(a->shape_in(), a->shape_out()), a_(std::move(a)), s_(s) {}

  Tensor do_apply(const Tensor& x) const override { return scaled(s_, a_->apply(x)); }
  Tensor do_adjoint(const Tensor& y) const override { return scaled(s_, a_->adjoint(y)); }

 private:
  OperatorPtr a_;
  double s_;
};

class GramOperator final : public LinearOperator {
 public:
  explicit GramOperator(OperatorPtr a)
      : LinearOperator(a->shape_in(), a->shape_in()), a_(std::move(a)) {}

  Tensor do_apply(const Tensor& x) const override { return a_->adjoint(a_->apply(x)); }
  Tensor do_adjoint(const Tensor& y) const override { return do_apply(y); }

 private:
  OperatorPtr a_;
};

}  // namespace

OperatorPtr identity(Shape shape) {
  shape_size(shape);
  if (shape.empty()) fail_invalid("identity requires a non-empty shape");
  return std::make_shared<IdentityOperator>(std::move(shape));
}

OperatorPtr gaussian_blur(const Shape& image_shape, double kernel_sigma) {
  require_2d(image_shape, "gaussian_blur");
  if (!(kernel_sigma > 0.0)) fail_invalid("gaussian_blur requires kernel_sigma > 0");
  return std::make_shared<GaussianBlurOperator>(image_shape, kernel_sigma);
}

OperatorPtr block_downsample(const Shape& image_shape, std::size_t factor) {
  require_2d(image_shape, "block_downsample");
  if (factor == 0) fail_invalid("block_downsample requires factor >= 1");
  if (image_shape[0] % factor != 0 || image_shape[1] % factor != 0) {
    fail_invalid("block_downsample: dims " + shape_to_string(image_shape) +
                 " not divisible by factor " + std::to_string(factor));
  }
  return std::make_shared<BlockDownsampleOperator>(image_shape, factor);
}

OperatorPtr nearest_upsample(const Shape& small_shape, std::size_t factor) {
  require_2d(small_shape, "nearest_upsample");
  if (factor == 0) fail_invalid("nearest_upsample requires factor >= 1");
  return std::make_shared<NearestUpsampleOperator>(small_shape, factor);
}

OperatorPtr mask(const Shape& image_shape, std::vector<std::size_t> kept_indices) {
  const std::size_t n = shape_size(image_shape);
  if (kept_indices.empty()) fail_invalid("mask requires a non-empty kept index set");
  std::unordered_set<std::size_t> seen;
  for (std::size_t idx : kept_indices) {
    if (idx >= n) {
      fail_invalid("mask index " + std::to_string(idx) + " out of range for " +
                   shape_to_string(image_shape));
    }
    if (!seen.insert(idx).second) fail_invalid("mask index " + std::to_string(idx) + " duplicated");
  }
  return std::make_shared<MaskOperator>(image_shape, std::move(kept_indices));
}

OperatorPtr toy_radon(std::size_t image_size, std::size_t n_views, std::size_t n_detectors) {
  if (image_size < 8) fail_invalid("toy_radon requires image_size >= 8");
  if (n_views < 1) fail_invalid("toy_radon requires n_views >= 1");
  if (n_detectors == 0) n_detectors = image_size;
  return std::make_shared<ToyRadonOperator>(image_size, n_views, n_detectors);
}

OperatorPtr laplacian_gram(const Shape& image_shape) {
  require_2d(image_shape, "laplacian_gram");
  return std::make_shared<LaplacianGramOperator>(image_shape);
}

OperatorPtr scaled_operator(OperatorPtr a, double s) {
  if (!a) fail_invalid("scaled_operator requires an operator");
  return std::make_shared<ScaledOperator>(std::move(a), s);
}

OperatorPtr gram_operator(OperatorPtr a) {
  if (!a) fail_invalid("gram_operator requires an operator");
  return std::make_shared<GramOperator>(std::move(a));
}

std::optional<double> partial_isometry_check(const LinearOperator& a, double tolerance,
                                             int n_probes, std::uint64_t probe_seed) {
  SeededRng rng(probe_seed);
  std::optional<double> alpha0;
  int checked = 0;
  // A = alpha0 A A^T A implies ||Ax||^2 = alpha0 ||A^T A x||... probing with
  // u = Ax: alpha0 = ||u||^2 / ||A^T u||^2 holds exactly for every probe.
  for (int i = 0; i < n_probes + 8 && checked < n_probes; ++i) {
    const Tensor x = gaussian(a.shape_in(), rng);
    const Tensor u = a.apply(x);
    const double un = norm2(u);
    if (!(un > 1e-12)) continue;
    const Tensor atu = a.adjoint(u);
    const double atn2 = dot(atu, atu);
    if (!(atn2 > 0.0)) return std::nullopt;
    if (!alpha0) alpha0 = dot(u, u) / atn2;
    const Tensor aata = a.apply(atu);
    const Tensor residual = axpby(1.0, u, -(*alpha0), aata);
    if (norm2(residual) > tolerance * un) return std::nullopt;
    ++checked;
  }
  if (checked < n_probes) return std::nullopt;
  return alpha0;
}

}  // namespace mesb
