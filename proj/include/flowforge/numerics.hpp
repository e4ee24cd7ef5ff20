#pragma once

// Dense real/complex linear algebra and 2-D discrete Fourier transforms.

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowforge {

using cplx = std::complex<double>;

/// Row-major dense matrix over double or std::complex<double>.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool square() const noexcept { return rows_ == cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  Matrix transpose() const;
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RMatrix = Matrix<double>;
using CMatrix = Matrix<cplx>;
/// Spatial plane, rows = height, cols = width.
using RPlane = Matrix<double>;
/// Frequency plane indexed by (u, v) = (row frequency, column frequency).
using CPlane = Matrix<cplx>;

template <class T>
Matrix<T> operator*(const Matrix<T>& a, const Matrix<T>& b);
template <class T>
std::vector<T> operator*(const Matrix<T>& a, std::span<const T> x);

/// Max |a - b| over all entries; shapes must agree.
template <class T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b);

/// Thrown by solve/inverse when a pivot falls below the singularity threshold.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(std::size_t pivot, const std::string& what)
      : std::runtime_error(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Pivot magnitudes below this declare a matrix singular.
inline constexpr double kPivotTolerance = 1e-12;

/// LU factorization with partial pivoting: P·A = L·U packed into one matrix.
template <class T>
struct LuFactorization {
  Matrix<T> packed;
  std::vector<std::size_t> perm;  // row i of P·A is row perm[i] of A
  int swaps = 0;
  // First pivot index with |pivot| < kPivotTolerance, or rows() when none.
  std::size_t singular_at = 0;

  bool singular() const noexcept { return singular_at < packed.rows(); }
};

template <class T>
LuFactorization<T> lu_factor(const Matrix<T>& m);

template <class T>
struct SlogDet {
  T phase;           // sign (real) or unit-modulus phase (complex)
  double logabsdet;  // -inf for singular input
};

/// Sign/phase and log|det| via LU. Singular input yields logabsdet = -inf.
template <class T>
SlogDet<T> lu_slogdet(const Matrix<T>& m);

/// Solves m·x = b. Throws SingularMatrixError carrying the pivot index.
template <class T>
std::vector<T> solve(const Matrix<T>& m, std::span<const T> b);

template <class T>
Matrix<T> inverse(const Matrix<T>& m);

/// Q = Q_1 Q_2 ... Q_k with Q_i = I - 2 v_i v_iᵀ / (v_iᵀ v_i). An empty list
/// yields the n×n identity. Zero vectors are rejected with their index.
RMatrix householder_orthogonal(std::size_t n, std::span<const std::vector<double>> vectors);

/// Unnormalized forward 2-D DFT: X[u,v] = Σ x[j,i]·exp(-2πi(uj/h + vi/w)).
CPlane dft2(const RPlane& plane);
CPlane dft2(const CPlane& plane);
/// Inverse with 1/(h·w) normalization, no realness check.
CPlane idft2_complex(const CPlane& spectrum);

/// Thrown by idft2 when the spectrum is not the transform of a real signal.
class NonHermitianError : public std::runtime_error {
 public:
  NonHermitianError(double residue, const std::string& what)
      : std::runtime_error(what), residue_(residue) {}
  double residue() const noexcept { return residue_; }

 private:
  double residue_;
};

/// Inverse DFT returning the real part. Throws NonHermitianError when the
/// imaginary residue exceeds `tolerance` times max(1, max |x|).
RPlane idft2(const CPlane& spectrum, double tolerance = 1e-9);

}  // namespace flowforge
