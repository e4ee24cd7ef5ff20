#include "flowforge/spectral.hpp"

#include <cmath>
#include <limits>

#include "flowforge/parallel.hpp"

namespace flowforge {
namespace {

std::size_t wrap(long k, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((k % m) + m) % m);
}

}  // namespace

FilterSpectrum filter_spectrum(const Filter& f, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw std::invalid_argument("filter_spectrum: empty image");
  FilterSpectrum s{h, w, std::vector<CMatrix>(h * w, CMatrix(f.c_out(), f.c_in()))};
  const auto [cy, cx] = f.center();
  for (std::size_t co = 0; co < f.c_out(); ++co)
    for (std::size_t ci = 0; ci < f.c_in(); ++ci) {
      RPlane plane(h, w);
      for (std::size_t dy = 0; dy < f.kh(); ++dy)
        for (std::size_t dx = 0; dx < f.kw(); ++dx) {
          const long oy = static_cast<long>(dy) - static_cast<long>(cy);
          const long ox = static_cast<long>(dx) - static_cast<long>(cx);
          plane(wrap(-oy, h), wrap(-ox, w)) += f(co, ci, dy, dx);
        }
      const CPlane spec = dft2(plane);
      for (std::size_t k = 0; k < h * w; ++k) s.blocks[k](co, ci) = spec.data()[k];
    }
  return s;
}

double spectral_logdet(const FilterSpectrum& s) {
  double total = 0.0;
  for (const auto& b : s.blocks) {
    const double l = lu_slogdet(b).logabsdet;
    if (std::isinf(l)) return -std::numeric_limits<double>::infinity();
    total += l;
  }
  return total;
}

FilterSpectrum invert_spectrum(const FilterSpectrum& s) {
  FilterSpectrum inv{s.h, s.w, {}};
  inv.blocks.reserve(s.blocks.size());
  for (std::size_t k = 0; k < s.blocks.size(); ++k) {
    try {
      inv.blocks.push_back(inverse(s.blocks[k]));
    } catch (const SingularMatrixError&) {
      throw SingularFrequencyError(k / s.w, k % s.w);
    }
  }
  return inv;
}

Tensor4 spectral_apply(const Tensor4& x, const FilterSpectrum& s) {
  if (x.h() != s.h || x.w() != s.w) throw std::invalid_argument("spectral_apply: spatial size mismatch");
  const std::size_t c_out = s.blocks.front().rows(), c_in = s.blocks.front().cols();
  if (x.c() != c_in) throw std::invalid_argument("spectral_apply: channel mismatch");
  const std::size_t h = s.h, w = s.w, hw = h * w;
  Tensor4 z({x.n(), c_out, h, w});
  parallel_for(x.n(), worker_count(), [&](std::size_t begin, std::size_t end) {
    std::vector<CPlane> xin(c_in);
    for (std::size_t n = begin; n < end; ++n) {
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        RPlane p(h, w);
        for (std::size_t k = 0; k < hw; ++k) p.data()[k] = x.example(n)[ci * hw + k];
        xin[ci] = dft2(p);
      }
      std::vector<CPlane> zout(c_out, CPlane(h, w));
      for (std::size_t k = 0; k < hw; ++k) {
        const CMatrix& b = s.blocks[k];
        for (std::size_t co = 0; co < c_out; ++co) {
          cplx acc{};
          for (std::size_t ci = 0; ci < c_in; ++ci) acc += b(co, ci) * xin[ci].data()[k];
          zout[co].data()[k] = acc;
        }
      }
      for (std::size_t co = 0; co < c_out; ++co) {
        const RPlane r = idft2(zout[co]);
        for (std::size_t k = 0; k < hw; ++k) z.example(n)[co * hw + k] = r.data()[k];
      }
    }
  });
  return z;
}

Tensor4 spectral_logdet_grad(const Filter& f, const FilterSpectrum& inverse) {
  const std::size_t h = inverse.h, w = inverse.w;
  const double hw = static_cast<double>(h * w);
  Tensor4 g(f.taps().shape());
  const auto [cy, cx] = f.center();
  for (std::size_t co = 0; co < f.c_out(); ++co)
    for (std::size_t ci = 0; ci < f.c_in(); ++ci) {
      CPlane plane(h, w);
      for (std::size_t k = 0; k < h * w; ++k) plane.data()[k] = inverse.blocks[k](ci, co);
      const CPlane back = idft2_complex(plane);
      for (std::size_t dy = 0; dy < f.kh(); ++dy)
        for (std::size_t dx = 0; dx < f.kw(); ++dx) {
          const long oy = static_cast<long>(dy) - static_cast<long>(cy);
          const long ox = static_cast<long>(dx) - static_cast<long>(cx);
          g(co, ci, dy, dx) = hw * back(wrap(oy, h), wrap(ox, w)).real();
        }
    }
  return g;
}

}  // namespace flowforge
