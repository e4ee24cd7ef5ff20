#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flowforge {

/// Extents of a rank-4 array in N-C-H-W order. Filters reuse the same
/// layout as (c_out, c_in, kh, kw).
struct Shape4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  constexpr std::size_t size() const noexcept { return n * c * h * w; }
  constexpr std::size_t plane() const noexcept { return h * w; }
  constexpr std::size_t example() const noexcept { return c * h * w; }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

/// Dense rank-4 real array; the universal signal carrier.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(Shape4 shape, std::vector<double> data);

  static Tensor4 scalar(double v) { return Tensor4({1, 1, 1, 1}, v); }
  /// Vector of length k stored as (1, 1, 1, k).
  static Tensor4 vector(std::vector<double> v);
  /// Matrix stored as (1, 1, rows, cols).
  static Tensor4 matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t n() const noexcept { return shape_.n; }
  std::size_t c() const noexcept { return shape_.c; }
  std::size_t h() const noexcept { return shape_.h; }
  std::size_t w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  double& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[index(n, c, y, x)];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[index(n, c, y, x)];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  /// Contiguous (c, h, w) block of example n.
  std::span<double> example(std::size_t n) noexcept {
    return std::span<double>(data_).subspan(n * shape_.example(), shape_.example());
  }
  std::span<const double> example(std::size_t n) const noexcept {
    return std::span<const double>(data_).subspan(n * shape_.example(), shape_.example());
  }

  Tensor4 reshaped(Shape4 shape) const;
  double item() const;
  bool all_finite() const noexcept;

  Tensor4& operator+=(const Tensor4& other);
  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor4& a, const Tensor4& b);

/// 8-bit image batch in N-C-H-W order.
struct ImageTensor {
  Shape4 shape;
  std::vector<std::uint8_t> data;

  ImageTensor() = default;
  explicit ImageTensor(Shape4 s) : shape(s), data(s.size(), 0) {}

  std::uint8_t& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data[((n * shape.c + c) * shape.h + y) * shape.w + x];
  }
  std::uint8_t at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data[((n * shape.c + c) * shape.h + y) * shape.w + x];
  }
  /// Examples [first, first + count) as a new batch.
  ImageTensor slice(std::size_t first, std::size_t count) const;
  ImageTensor gather(std::span<const std::size_t> indices) const;
  bool operator==(const ImageTensor&) const = default;
};

}  // namespace flowforge
