#pragma once

// Convolution kernels, autoregressive masks, filter composition, triangular
// substitution inverses and the dense-matrix expansion oracle.
//
// Vectorized signals use the raster order t = c + C·i + (C·W)·j where c is
// the channel, i the column and j the row. Every triangularity statement in
// this module is relative to that order.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowforge/numerics.hpp"
#include "flowforge/tensor.hpp"

namespace flowforge {

enum class Boundary { Zero, Wrap };
enum class MaskVariant { Lower, Upper };

const char* to_string(Boundary b);
const char* to_string(MaskVariant v);

struct Padding {
  std::size_t top = 0, bottom = 0, left = 0, right = 0;
  bool operator==(const Padding&) const = default;
};

/// Taps of shape (c_out, c_in, kh, kw) plus the zero padding that keeps the
/// output the same spatial size as the input (top + bottom == kh - 1).
class Filter {
 public:
  Filter() = default;
  Filter(Tensor4 taps, Padding pad);

  /// Odd-sized filter padded symmetrically.
  static Filter centered(Tensor4 taps);
  /// Identity channel mixing at the center tap of an odd k×k filter.
  static Filter delta(std::size_t channels, std::size_t k = 1);

  std::size_t c_out() const noexcept { return taps_.n(); }
  std::size_t c_in() const noexcept { return taps_.c(); }
  std::size_t kh() const noexcept { return taps_.h(); }
  std::size_t kw() const noexcept { return taps_.w(); }
  const Padding& pad() const noexcept { return pad_; }
  const Tensor4& taps() const noexcept { return taps_; }
  Tensor4& taps() noexcept { return taps_; }

  /// Tap aligned with the output pixel: (pad.top, pad.left).
  std::pair<std::size_t, std::size_t> center() const noexcept { return {pad_.top, pad_.left}; }

  double operator()(std::size_t co, std::size_t ci, std::size_t dy, std::size_t dx) const noexcept {
    return taps_(co, ci, dy, dx);
  }
  double& operator()(std::size_t co, std::size_t ci, std::size_t dy, std::size_t dx) noexcept {
    return taps_(co, ci, dy, dx);
  }

 private:
  Tensor4 taps_;
  Padding pad_;
};

/// Cross-correlation layer: z[n,co,j,i] = Σ f[co,ci,dy,dx]·x[n,ci,j+dy-top,i+dx-left],
/// with out-of-range reads either zero or wrapped around.
Tensor4 conv2d(const Tensor4& x, const Filter& f, Boundary boundary);

/// Adjoint of conv2d with respect to its input.
Tensor4 conv2d_backward_input(const Tensor4& grad_out, const Filter& f, Boundary boundary);
/// Gradient of <grad_out, conv2d(x, f)> with respect to the taps of f.
Tensor4 conv2d_backward_filter(const Tensor4& x, const Tensor4& grad_out, const Filter& f,
                               Boundary boundary);

/// Binary p×p mask whose masked filters are triangular in raster order.
/// LOWER: bottom-right tap sits on the output pixel, pad (p-1, 0, p-1, 0);
/// UPPER is the mirror image. The center channel block is lower (upper)
/// triangular including the diagonal.
Filter build_autoregressive_mask(MaskVariant variant, std::size_t p, std::size_t channels);

/// Filter k with conv2d(conv2d(x, k1), k2) == conv2d(x, k) on signals whose
/// support stays inside the frame (full linear convolution). Pads add up.
Filter combine_filters(const Filter& k2, const Filter& k1);

/// Raised when a triangular layer has a zero diagonal tap.
class NonInvertibleError : public std::runtime_error {
 public:
  NonInvertibleError(std::size_t channel, const std::string& what)
      : std::runtime_error(what), channel_(channel) {}
  std::size_t channel() const noexcept { return channel_; }

 private:
  std::size_t channel_;
};

enum class SubstitutionMode { BatchParallel, Sequential };

/// Solves conv2d(x, f, Zero) == z by substitution. LOWER runs raster order
/// ascending, UPPER descending. Examples are independent; BatchParallel
/// sweeps all examples together and fans chunks of the batch out across
/// `workers` threads (0 = worker_count()).
Tensor4 solve_autoregressive(const Tensor4& z, const Filter& f, MaskVariant variant,
                             SubstitutionMode mode = SubstitutionMode::BatchParallel,
                             std::size_t workers = 0);

/// Throws std::invalid_argument if f has taps that violate the ordering of
/// `variant`, and NonInvertibleError naming the channel of a zero diagonal tap.
void check_autoregressive(const Filter& f, MaskVariant variant);

struct DenseOperator {
  RMatrix matrix;
  Boundary boundary;
};

/// (c_out·h·w) × (c_in·h·w) matrix M with vec(conv2d(x, f, b)) == M·vec(x).
DenseOperator dense_operator(const Filter& f, std::size_t h, std::size_t w, Boundary boundary);

/// Example n of x in raster order.
std::vector<double> vectorize(const Tensor4& x, std::size_t n = 0);
/// Inverse of vectorize for a single example.
Tensor4 unvectorize(std::span<const double> v, std::size_t c, std::size_t h, std::size_t w);

}  // namespace flowforge
