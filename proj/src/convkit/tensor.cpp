#include "flowforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace flowforge {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) +
         ", " + std::to_string(s.w) + ")";
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("Tensor4: data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
  }
}

Tensor4 Tensor4::vector(std::vector<double> v) {
  const std::size_t k = v.size();
  return Tensor4({1, 1, 1, k}, std::move(v));
}

Tensor4 Tensor4::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor4({1, 1, rows, cols}, fill);
}

Tensor4 Tensor4::reshaped(Shape4 shape) const {
  if (shape.size() != shape_.size()) {
    throw std::invalid_argument("reshape: " + to_string(shape_) + " -> " + to_string(shape));
  }
  return Tensor4(shape, data_);
}

double Tensor4::item() const {
  if (data_.size() != 1) throw std::logic_error("item: tensor has " + std::to_string(size()) + " entries");
  return data_[0];
}

bool Tensor4::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor4& Tensor4::operator+=(const Tensor4& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("Tensor4 +=: shape " + to_string(other.shape_) + " vs " + to_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

ImageTensor ImageTensor::slice(std::size_t first, std::size_t count) const {
  if (first + count > shape.n) throw std::out_of_range("ImageTensor::slice past end of batch");
  ImageTensor out({count, shape.c, shape.h, shape.w});
  const std::size_t ex = shape.example();
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(first * ex), count * ex, out.data.begin());
  return out;
}

ImageTensor ImageTensor::gather(std::span<const std::size_t> indices) const {
  ImageTensor out({indices.size(), shape.c, shape.h, shape.w});
  const std::size_t ex = shape.example();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= shape.n) throw std::out_of_range("ImageTensor::gather index out of range");
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(indices[k] * ex), ex,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * ex));
  }
  return out;
}

}  // namespace flowforge
