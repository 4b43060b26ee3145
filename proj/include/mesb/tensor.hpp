#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mesb/error.hpp"

namespace mesb {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense real tensor: flat row-major double storage plus a shape.
/// Value semantics; treat instances as immutable once handed to another
/// component (copy before mutating shared data).
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors, row-major (row, col).
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  Shape shape_;
  std::vector<double> data_;
};

// y := a*x + b*y semantics as a pure function: returns a*x + b*y.
Tensor axpby(double a, const Tensor& x, double b, const Tensor& y);
Tensor scaled(double a, const Tensor& x);
double dot(const Tensor& x, const Tensor& y);
double norm2(const Tensor& x);

// Throws ErrorKind::Internal naming `context` if any entry is NaN/Inf.
void ensure_finite(const Tensor& x, const char* context);

}  // namespace mesb
