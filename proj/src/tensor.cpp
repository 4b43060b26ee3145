#include "mesb/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mesb {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) fail_invalid("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) fail_invalid("tensor dimensions must be >= 1, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape) {
  validate_shape(shape);
  std::vector<double> data(shape_size(shape), 0.0);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::full(Shape shape, double value) {
  validate_shape(shape);
  std::vector<double> data(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  validate_shape(shape);
  if (shape_size(shape) != data.size()) {
    fail_invalid("tensor data length " + std::to_string(data.size()) +
                 " does not match shape " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) fail_invalid("rows() requires a 2-D tensor, shape is " + shape_to_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) fail_invalid("cols() requires a 2-D tensor, shape is " + shape_to_string(shape_));
  return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
  if (!x.same_shape(y)) {
    fail_invalid("axpby shape mismatch: " + shape_to_string(x.shape()) + " vs " +
                 shape_to_string(y.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  const double* py = y.data();
  double* po = out.data();
  for (std::size_t i = 0, n = x.size(); i < n; ++i) po[i] = a * px[i] + b * py[i];
  return out;
}

Tensor scaled(double a, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0, n = x.size(); i < n; ++i) po[i] = a * px[i];
  return out;
}

double dot(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y)) {
    fail_invalid("dot shape mismatch: " + shape_to_string(x.shape()) + " vs " +
                 shape_to_string(y.shape()));
  }
  double s = 0.0;
  const double* px = x.data();
  const double* py = y.data();
  for (std::size_t i = 0, n = x.size(); i < n; ++i) s += px[i] * py[i];
  return s;
}

double norm2(const Tensor& x) { return std::sqrt(dot(x, x)); }

void ensure_finite(const Tensor& x, const char* context) {
  for (std::size_t i = 0, n = x.size(); i < n; ++i) {
    if (!std::isfinite(x[i])) {
      fail(ErrorKind::Internal,
           std::string(context) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace mesb
