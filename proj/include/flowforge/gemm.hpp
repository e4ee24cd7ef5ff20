#pragma once

#include <cstddef>

// Row-major accumulate-into kernels shared by the convolution and autodiff
// code. With CBLAS available they forward to dgemm; the portable loops keep
// the innermost index contiguous.

#ifdef FLOWFORGE_HAVE_CBLAS
#include <cblas.h>
#endif

namespace flowforge::gemm {

#ifdef FLOWFORGE_HAVE_CBLAS

inline void nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, int(m), int(n), int(k), 1.0, a, int(k), b, int(n), 1.0, c,
              int(n));
}

inline void tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(m), int(n), int(k), 1.0, a, int(m), b, int(n), 1.0, c,
              int(n));
}

inline void nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, int(m), int(n), int(k), 1.0, a, int(k), b, int(k), 1.0, c,
              int(n));
}

#else

/// C(M×N) += A(M×K) · B(K×N)
inline void nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

/// C(M×N) += Aᵀ · B with A stored K×M and B stored K×N.
inline void tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a[p * m + i];
      if (api == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

/// C(M×N) += A · Bᵀ with A stored M×K and B stored N×K.
inline void nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

#endif

}  // namespace flowforge::gemm
