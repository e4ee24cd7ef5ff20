#include <algorithm>
#include <vector>

#include "flowforge/convkit.hpp"
#include "flowforge/gemm.hpp"
#include "flowforge/parallel.hpp"

namespace flowforge {

const char* to_string(Boundary b) { return b == Boundary::Zero ? "zero" : "wrap"; }
const char* to_string(MaskVariant v) { return v == MaskVariant::Lower ? "lower" : "upper"; }

Filter::Filter(Tensor4 taps, Padding pad) : taps_(std::move(taps)), pad_(pad) {
  if (taps_.h() == 0 || taps_.w() == 0 || taps_.n() == 0 || taps_.c() == 0) {
    throw std::invalid_argument("Filter: empty taps " + to_string(taps_.shape()));
  }
  if (pad_.top + pad_.bottom + 1 != taps_.h() || pad_.left + pad_.right + 1 != taps_.w()) {
    throw std::invalid_argument("Filter: padding (" + std::to_string(pad_.top) + ", " +
                                std::to_string(pad_.bottom) + ", " + std::to_string(pad_.left) + ", " +
                                std::to_string(pad_.right) + ") does not preserve size for a " +
                                std::to_string(taps_.h()) + "x" + std::to_string(taps_.w()) + " kernel");
  }
}

Filter Filter::centered(Tensor4 taps) {
  if (taps.h() % 2 == 0 || taps.w() % 2 == 0) {
    throw std::invalid_argument("Filter::centered: kernel extents must be odd");
  }
  const std::size_t ph = taps.h() / 2, pw = taps.w() / 2;
  return Filter(std::move(taps), {ph, ph, pw, pw});
}

Filter Filter::delta(std::size_t channels, std::size_t k) {
  Tensor4 taps({channels, channels, k, k});
  for (std::size_t c = 0; c < channels; ++c) taps(c, c, k / 2, k / 2) = 1.0;
  return centered(std::move(taps));
}

namespace {

inline long wrap_index(long v, long n) {
  v %= n;
  return v < 0 ? v + n : v;
}

// cols is (C_in·kh·kw) × (H·W); row (ci, dy, dx) holds the input samples that
// tap (dy, dx) of channel ci meets at every output pixel.
void im2col(const double* x, std::size_t channels, std::size_t height, std::size_t width,
            const Filter& f, Boundary boundary, double* cols) {
  const long h = static_cast<long>(height), w = static_cast<long>(width);
  const std::size_t hw = height * width;
  for (std::size_t ci = 0; ci < channels; ++ci) {
    const double* plane = x + ci * hw;
    for (std::size_t dy = 0; dy < f.kh(); ++dy) {
      for (std::size_t dx = 0; dx < f.kw(); ++dx) {
        double* dst = cols + ((ci * f.kh() + dy) * f.kw() + dx) * hw;
        const long oy = static_cast<long>(dy) - static_cast<long>(f.pad().top);
        const long ox = static_cast<long>(dx) - static_cast<long>(f.pad().left);
        for (long y = 0; y < h; ++y, dst += w) {
          long sy = y + oy;
          if (boundary == Boundary::Zero) {
            if (sy < 0 || sy >= h) {
              std::fill(dst, dst + w, 0.0);
              continue;
            }
            const double* row = plane + sy * w;
            const long lo = std::clamp(-ox, 0L, w), hi = std::clamp(w - ox, 0L, w);
            std::fill(dst, dst + lo, 0.0);
            for (long xx = lo; xx < hi; ++xx) dst[xx] = row[xx + ox];
            std::fill(dst + std::max(lo, hi), dst + w, 0.0);
          } else {
            sy = wrap_index(sy, h);
            const double* row = plane + sy * w;
            for (long xx = 0; xx < w; ++xx) dst[xx] = row[wrap_index(xx + ox, w)];
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatters column gradients back onto the input plane.
void col2im(const double* cols, std::size_t channels, std::size_t height, std::size_t width,
            const Filter& f, Boundary boundary, double* x) {
  const long h = static_cast<long>(height), w = static_cast<long>(width);
  const std::size_t hw = height * width;
  for (std::size_t ci = 0; ci < channels; ++ci) {
    double* plane = x + ci * hw;
    for (std::size_t dy = 0; dy < f.kh(); ++dy) {
      for (std::size_t dx = 0; dx < f.kw(); ++dx) {
        const double* src = cols + ((ci * f.kh() + dy) * f.kw() + dx) * hw;
        const long oy = static_cast<long>(dy) - static_cast<long>(f.pad().top);
        const long ox = static_cast<long>(dx) - static_cast<long>(f.pad().left);
        for (long y = 0; y < h; ++y, src += w) {
          long sy = y + oy;
          if (boundary == Boundary::Zero) {
            if (sy < 0 || sy >= h) continue;
            double* row = plane + sy * w;
            const long lo = std::clamp(-ox, 0L, w), hi = std::clamp(w - ox, 0L, w);
            for (long xx = lo; xx < hi; ++xx) row[xx + ox] += src[xx];
          } else {
            sy = wrap_index(sy, h);
            double* row = plane + sy * w;
            for (long xx = 0; xx < w; ++xx) row[wrap_index(xx + ox, w)] += src[xx];
          }
        }
      }
    }
  }
}

bool is_pointwise(const Filter& f) { return f.kh() == 1 && f.kw() == 1; }

std::size_t conv_workers(std::size_t batch, std::size_t work_per_example) {
  // Threads only pay off for sizeable batches.
  if (batch < 2 || batch * work_per_example < (1u << 16)) return 1;
  return worker_count();
}

}  // namespace

Tensor4 conv2d(const Tensor4& x, const Filter& f, Boundary boundary) {
  if (f.c_in() != x.c()) {
    throw std::invalid_argument("conv2d: filter expects " + std::to_string(f.c_in()) +
                                " input channels, input has " + std::to_string(x.c()));
  }
  const std::size_t hw = x.h() * x.w();
  const std::size_t k = f.c_in() * f.kh() * f.kw();
  Tensor4 out({x.n(), f.c_out(), x.h(), x.w()});
  const double* weights = f.taps().data().data();

  parallel_for(x.n(), conv_workers(x.n(), k * hw * f.c_out()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> cols(is_pointwise(f) ? 0 : k * hw);
    for (std::size_t n = begin; n < end; ++n) {
      const double* src = x.example(n).data();
      if (!is_pointwise(f)) {
        im2col(src, x.c(), x.h(), x.w(), f, boundary, cols.data());
        src = cols.data();
      }
      gemm::nn(f.c_out(), hw, k, weights, src, out.example(n).data());
    }
  });
  return out;
}

Tensor4 conv2d_backward_input(const Tensor4& grad_out, const Filter& f, Boundary boundary) {
  if (f.c_out() != grad_out.c()) throw std::invalid_argument("conv2d_backward_input: channel mismatch");
  const std::size_t hw = grad_out.h() * grad_out.w();
  const std::size_t k = f.c_in() * f.kh() * f.kw();
  Tensor4 gx({grad_out.n(), f.c_in(), grad_out.h(), grad_out.w()});
  const double* weights = f.taps().data().data();

  parallel_for(grad_out.n(), conv_workers(grad_out.n(), k * hw * f.c_out()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> cols(k * hw);
    for (std::size_t n = begin; n < end; ++n) {
      if (is_pointwise(f)) {
        gemm::tn(k, hw, f.c_out(), weights, grad_out.example(n).data(), gx.example(n).data());
        continue;
      }
      std::fill(cols.begin(), cols.end(), 0.0);
      gemm::tn(k, hw, f.c_out(), weights, grad_out.example(n).data(), cols.data());
      col2im(cols.data(), f.c_in(), grad_out.h(), grad_out.w(), f, boundary, gx.example(n).data());
    }
  });
  return gx;
}

Tensor4 conv2d_backward_filter(const Tensor4& x, const Tensor4& grad_out, const Filter& f,
                               Boundary boundary) {
  if (f.c_in() != x.c() || f.c_out() != grad_out.c() || x.n() != grad_out.n()) {
    throw std::invalid_argument("conv2d_backward_filter: shape mismatch");
  }
  const std::size_t hw = x.h() * x.w();
  const std::size_t k = f.c_in() * f.kh() * f.kw();
  Tensor4 gf(f.taps().shape());
  std::vector<double> cols(is_pointwise(f) ? 0 : k * hw);
  // Sequential over the batch so the summation order never depends on the
  // worker count.
  for (std::size_t n = 0; n < x.n(); ++n) {
    const double* src = x.example(n).data();
    if (!is_pointwise(f)) {
      im2col(src, x.c(), x.h(), x.w(), f, boundary, cols.data());
      src = cols.data();
    }
    gemm::nt(f.c_out(), k, hw, grad_out.example(n).data(), src, gf.data().data());
  }
  return gf;
}

}  // namespace flowforge
