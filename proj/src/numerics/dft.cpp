#include "flowforge/numerics.hpp"

#include <cmath>
#include <numbers>

namespace flowforge {
namespace {

// twiddle[k] = exp(sign·2πi·k/n)
std::vector<cplx> twiddles(std::size_t n, double sign) {
  std::vector<cplx> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    t[k] = {std::cos(angle), std::sin(angle)};
  }
  return t;
}

// Direct O(n²) transform along rows, then along columns.
CPlane transform(const CPlane& in, double sign) {
  const std::size_t h = in.rows(), w = in.cols();
  const auto tw = twiddles(w, sign);
  const auto th = twiddles(h, sign);

  CPlane rows(h, w);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t v = 0; v < w; ++v) {
      cplx acc{};
      std::size_t k = 0;
      for (std::size_t i = 0; i < w; ++i) {
        acc += in(j, i) * tw[k];
        k += v;
        if (k >= w) k -= w;
      }
      rows(j, v) = acc;
    }
  }

  CPlane out(h, w);
  for (std::size_t u = 0; u < h; ++u) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < h; ++j) {
      const cplx t = th[k];
      for (std::size_t v = 0; v < w; ++v) out(u, v) += rows(j, v) * t;
      k += u;
      if (k >= h) k -= h;
    }
  }
  return out;
}

}  // namespace

CPlane dft2(const CPlane& plane) {
  if (plane.rows() == 0 || plane.cols() == 0) throw std::invalid_argument("dft2: empty plane");
  return transform(plane, -1.0);
}

CPlane dft2(const RPlane& plane) {
  CPlane c(plane.rows(), plane.cols());
  for (std::size_t i = 0; i < plane.size(); ++i) c.data()[i] = plane.data()[i];
  return dft2(c);
}

CPlane idft2_complex(const CPlane& spectrum) {
  if (spectrum.rows() == 0 || spectrum.cols() == 0) throw std::invalid_argument("idft2: empty plane");
  CPlane out = transform(spectrum, +1.0);
  const double scale = 1.0 / static_cast<double>(spectrum.size());
  for (auto& z : out.data()) z *= scale;
  return out;
}

RPlane idft2(const CPlane& spectrum, double tolerance) {
  const CPlane full = idft2_complex(spectrum);
  RPlane out(full.rows(), full.cols());
  double residue = 0.0, magnitude = 1.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    out.data()[i] = full.data()[i].real();
    residue = std::max(residue, std::abs(full.data()[i].imag()));
    magnitude = std::max(magnitude, std::abs(full.data()[i].real()));
  }
  if (residue > tolerance * magnitude) {
    throw NonHermitianError(residue, "idft2: spectrum is not Hermitian (imaginary residue " +
                                         std::to_string(residue) + ")");
  }
  return out;
}

}  // namespace flowforge
