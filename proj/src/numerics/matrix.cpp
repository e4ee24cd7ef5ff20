#include "flowforge/numerics.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace flowforge {

template <class T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

template <class T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
  return m;
}

template <class T>
Matrix<T> Matrix<T>::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

template <class T>
Matrix<T> operator*(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: inner dimensions differ");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik == T{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

template <class T>
std::vector<T> operator*(const Matrix<T>& a, std::span<const T> x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector product: size mismatch");
  std::vector<T> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T acc{};
    for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * x[k];
    out[i] = acc;
  }
  return out;
}

template <class T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
  return worst;
}

template <class T>
LuFactorization<T> lu_factor(const Matrix<T>& m) {
  if (!m.square()) throw std::invalid_argument("lu_factor: matrix is not square");
  const std::size_t n = m.rows();
  LuFactorization<T> lu{m, std::vector<std::size_t>(n), 0, n};
  for (std::size_t i = 0; i < n; ++i) lu.perm[i] = i;
  Matrix<T>& a = lu.packed;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(a(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > best) {
        best = std::abs(a(r, k));
        pivot = r;
      }
    }
    if (pivot != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(k, c), a(pivot, c));
      std::swap(lu.perm[k], lu.perm[pivot]);
      ++lu.swaps;
    }
    if (best < kPivotTolerance) {
      if (lu.singular_at == n) lu.singular_at = k;
      continue;
    }
    const T inv_pivot = T{1} / a(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      const T factor = a(r, k) * inv_pivot;
      a(r, k) = factor;
      if (factor == T{}) continue;
      for (std::size_t c = k + 1; c < n; ++c) a(r, c) -= factor * a(k, c);
    }
  }
  return lu;
}

template <class T>
SlogDet<T> lu_slogdet(const Matrix<T>& m) {
  const auto lu = lu_factor(m);
  if (lu.singular()) return {T{0}, -std::numeric_limits<double>::infinity()};
  T phase = (lu.swaps % 2 == 0) ? T{1} : T{-1};
  double logabs = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const T d = lu.packed(i, i);
    const double mag = std::abs(d);
    logabs += std::log(mag);
    phase *= d / mag;
  }
  return {phase, logabs};
}

namespace {

template <class T>
void lu_solve_in_place(const LuFactorization<T>& lu, std::span<const T> b, std::span<T> x) {
  const std::size_t n = lu.packed.rows();
  const Matrix<T>& a = lu.packed;
  for (std::size_t i = 0; i < n; ++i) {
    T acc = b[lu.perm[i]];
    for (std::size_t k = 0; k < i; ++k) acc -= a(i, k) * x[k];
    x[i] = acc;
  }
  for (std::size_t i = n; i-- > 0;) {
    T acc = x[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= a(i, k) * x[k];
    x[i] = acc / a(i, i);
  }
}

template <class T>
void throw_if_singular(const LuFactorization<T>& lu, const char* who) {
  if (lu.singular()) {
    throw SingularMatrixError(lu.singular_at, std::string(who) + ": singular matrix (pivot " +
                                                  std::to_string(lu.singular_at) + ")");
  }
}

}  // namespace

template <class T>
std::vector<T> solve(const Matrix<T>& m, std::span<const T> b) {
  if (b.size() != m.rows()) throw std::invalid_argument("solve: right-hand side size mismatch");
  const auto lu = lu_factor(m);
  throw_if_singular(lu, "solve");
  std::vector<T> x(b.size());
  lu_solve_in_place<T>(lu, b, x);
  return x;
}

template <class T>
Matrix<T> inverse(const Matrix<T>& m) {
  const auto lu = lu_factor(m);
  throw_if_singular(lu, "inverse");
  const std::size_t n = m.rows();
  Matrix<T> inv(n, n);
  std::vector<T> e(n), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), T{});
    e[j] = T{1};
    lu_solve_in_place<T>(lu, e, col);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

RMatrix householder_orthogonal(std::size_t n, std::span<const std::vector<double>> vectors) {
  RMatrix q = RMatrix::identity(n);
  for (std::size_t idx = 0; idx < vectors.size(); ++idx) {
    const auto& v = vectors[idx];
    if (v.size() != n) {
      throw std::invalid_argument("householder_orthogonal: vector " + std::to_string(idx) +
                                  " has dimension " + std::to_string(v.size()) + ", expected " +
                                  std::to_string(n));
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (std::sqrt(norm2) <= 1e-12) {
      throw std::invalid_argument("householder_orthogonal: vector " + std::to_string(idx) +
                                  " is zero");
    }
    // q <- q (I - 2 v vᵀ / vᵀv)
    for (std::size_t r = 0; r < n; ++r) {
      double qv = 0.0;
      for (std::size_t k = 0; k < n; ++k) qv += q(r, k) * v[k];
      const double s = 2.0 * qv / norm2;
      for (std::size_t c = 0; c < n; ++c) q(r, c) -= s * v[c];
    }
  }
  return q;
}

template class Matrix<double>;
template class Matrix<cplx>;
template RMatrix operator*(const RMatrix&, const RMatrix&);
template CMatrix operator*(const CMatrix&, const CMatrix&);
template std::vector<double> operator*(const RMatrix&, std::span<const double>);
template std::vector<cplx> operator*(const CMatrix&, std::span<const cplx>);
template double max_abs_diff(const RMatrix&, const RMatrix&);
template double max_abs_diff(const CMatrix&, const CMatrix&);
template LuFactorization<double> lu_factor(const RMatrix&);
template LuFactorization<cplx> lu_factor(const CMatrix&);
template SlogDet<double> lu_slogdet(const RMatrix&);
template SlogDet<cplx> lu_slogdet(const CMatrix&);
template std::vector<double> solve(const RMatrix&, std::span<const double>);
template std::vector<cplx> solve(const CMatrix&, std::span<const cplx>);
template RMatrix inverse(const RMatrix&);
template CMatrix inverse(const CMatrix&);

}  // namespace flowforge
