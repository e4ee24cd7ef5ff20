#include "flowforge/convkit.hpp"

namespace flowforge {

std::vector<double> vectorize(const Tensor4& x, std::size_t n) {
  const std::size_t c = x.c(), w = x.w();
  std::vector<double> v(x.shape().example());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < x.h(); ++j)
      for (std::size_t i = 0; i < w; ++i) v[ch + c * i + c * w * j] = x(n, ch, j, i);
  return v;
}

Tensor4 unvectorize(std::span<const double> v, std::size_t c, std::size_t h, std::size_t w) {
  if (v.size() != c * h * w) throw std::invalid_argument("unvectorize: length mismatch");
  Tensor4 x({1, c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t i = 0; i < w; ++i) x(0, ch, j, i) = v[ch + c * i + c * w * j];
  return x;
}

DenseOperator dense_operator(const Filter& f, std::size_t h, std::size_t w, Boundary boundary) {
  if (h == 0 || w == 0) throw std::invalid_argument("dense_operator: empty image");
  const std::size_t co_n = f.c_out(), ci_n = f.c_in();
  RMatrix m(co_n * h * w, ci_n * h * w);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  for (long j = 0; j < lh; ++j)
    for (long i = 0; i < lw; ++i)
      for (std::size_t dy = 0; dy < f.kh(); ++dy)
        for (std::size_t dx = 0; dx < f.kw(); ++dx) {
          long sy = j + static_cast<long>(dy) - static_cast<long>(f.pad().top);
          long sx = i + static_cast<long>(dx) - static_cast<long>(f.pad().left);
          if (boundary == Boundary::Zero) {
            if (sy < 0 || sy >= lh || sx < 0 || sx >= lw) continue;
          } else {
            sy = ((sy % lh) + lh) % lh;
            sx = ((sx % lw) + lw) % lw;
          }
          for (std::size_t co = 0; co < co_n; ++co) {
            const std::size_t row = co + co_n * static_cast<std::size_t>(i) + co_n * w * static_cast<std::size_t>(j);
            for (std::size_t ci = 0; ci < ci_n; ++ci) {
              const std::size_t col =
                  ci + ci_n * static_cast<std::size_t>(sx) + ci_n * w * static_cast<std::size_t>(sy);
              m(row, col) += f(co, ci, dy, dx);
            }
          }
        }
  return {std::move(m), boundary};
}

}  // namespace flowforge
