#pragma once

#include <Eigen/Dense>

#include <vector>

#include "mesb/linop.hpp"
#include "mesb/rng.hpp"
#include "mesb/tensor.hpp"

namespace testsupport {

using mesb::Tensor;

// Materializes a matrix-free operator column by column.
inline Eigen::MatrixXd dense_from_operator(const mesb::LinearOperator& a) {
  const std::size_t n = a.size_in();
  const std::size_t m = a.size_out();
  Eigen::MatrixXd mat(m, n);
  Tensor e = Tensor::zeros(a.shape_in());
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Tensor col = a.apply(e);
    for (std::size_t i = 0; i < m; ++i) {
      mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    e[j] = 0.0;
  }
  return mat;
}

inline Eigen::VectorXd to_eigen(const Tensor& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = t[i];
  return v;
}

inline Tensor from_eigen(const Eigen::VectorXd& v, const mesb::Shape& shape) {
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = v(static_cast<Eigen::Index>(i));
  return t;
}

// Plain Gaussian elimination with partial pivoting; the CG cross-check must
// not share a solver implementation with anything it verifies.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// Dense matrix wrapped as a LinearOperator, for random-instance tests.
class DenseOperator final : public mesb::LinearOperator {
 public:
  DenseOperator(Eigen::MatrixXd mat, mesb::Shape in, mesb::Shape out)
      : LinearOperator(std::move(in), std::move(out)), mat_(std::move(mat)) {}

  static std::shared_ptr<DenseOperator> random(std::size_t m, std::size_t n,
                                               mesb::SeededRng& rng) {
    Eigen::MatrixXd mat(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            rng.normal() / std::sqrt(static_cast<double>(n));
      }
    }
    return std::make_shared<DenseOperator>(std::move(mat), mesb::Shape{n}, mesb::Shape{m});
  }

  const Eigen::MatrixXd& matrix() const { return mat_; }

 protected:
  Tensor do_apply(const Tensor& x) const override {
    const Eigen::VectorXd out = mat_ * to_eigen(x);
    return from_eigen(out, shape_out());
  }
  Tensor do_adjoint(const Tensor& y) const override {
    const Eigen::VectorXd out = mat_.transpose() * to_eigen(y);
    return from_eigen(out, shape_in());
  }

 private:
  Eigen::MatrixXd mat_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double rel_l2_diff(const Tensor& a, const Tensor& b) {
  return mesb::norm2(mesb::axpby(1.0, a, -1.0, b)) / std::max(mesb::norm2(b), 1e-300);
}

}  // namespace testsupport
