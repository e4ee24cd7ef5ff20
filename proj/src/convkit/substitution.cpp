#include <cmath>
#include <vector>

#include "flowforge/convkit.hpp"
#include "flowforge/parallel.hpp"

namespace flowforge {
namespace {

struct Tap {
  std::size_t ci;
  long oy, ox;
  double weight;
};

bool precedes(MaskVariant variant, long oy, long ox, std::size_t ci, std::size_t co) {
  if (variant == MaskVariant::Upper) {
    oy = -oy;
    ox = -ox;
  }
  if (oy != 0) return oy < 0;
  if (ox != 0) return ox < 0;
  return variant == MaskVariant::Lower ? ci < co : ci > co;
}

// Off-diagonal taps per output channel; the diagonal tap is returned separately.
struct Plan {
  std::vector<std::vector<Tap>> taps;
  std::vector<double> inv_diag;
};

Plan make_plan(const Filter& f, MaskVariant variant) {
  check_autoregressive(f, variant);
  Plan plan{std::vector<std::vector<Tap>>(f.c_out()), std::vector<double>(f.c_out())};
  const auto [cy, cx] = f.center();
  for (std::size_t co = 0; co < f.c_out(); ++co) {
    plan.inv_diag[co] = 1.0 / f(co, co, cy, cx);
    for (std::size_t ci = 0; ci < f.c_in(); ++ci)
      for (std::size_t dy = 0; dy < f.kh(); ++dy)
        for (std::size_t dx = 0; dx < f.kw(); ++dx) {
          const double wt = f(co, ci, dy, dx);
          if (wt == 0.0 || (ci == co && dy == cy && dx == cx)) continue;
          plan.taps[co].push_back({ci, static_cast<long>(dy) - static_cast<long>(cy),
                                   static_cast<long>(dx) - static_cast<long>(cx), wt});
        }
  }
  return plan;
}

// Visits (j, i, c) in raster order, ascending for LOWER and descending for UPPER.
template <class Fn>
void raster_sweep(MaskVariant variant, std::size_t h, std::size_t w, std::size_t c, Fn&& fn) {
  const std::size_t total = h * w * c;
  for (std::size_t step = 0; step < total; ++step) {
    const std::size_t t = variant == MaskVariant::Lower ? step : total - 1 - step;
    const std::size_t ch = t % c, pixel = t / c;
    fn(pixel / w, pixel % w, ch);
  }
}

void solve_sequential(const Tensor4& z, const Plan& plan, MaskVariant variant, Tensor4& x,
                      std::size_t n) {
  const long h = static_cast<long>(z.h()), w = static_cast<long>(z.w());
  raster_sweep(variant, z.h(), z.w(), z.c(), [&](std::size_t j, std::size_t i, std::size_t co) {
    double acc = z(n, co, j, i);
    for (const Tap& tap : plan.taps[co]) {
      const long sy = static_cast<long>(j) + tap.oy, sx = static_cast<long>(i) + tap.ox;
      if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
      acc -= tap.weight * x(n, tap.ci, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
    }
    x(n, co, j, i) = acc * plan.inv_diag[co];
  });
}

// Pixel-major layout with the batch innermost so every tap update is a
// contiguous axpy over the examples of this chunk.
void solve_batched(const Tensor4& z, const Plan& plan, MaskVariant variant, Tensor4& x,
                   std::size_t begin, std::size_t end) {
  const std::size_t nb = end - begin, c = z.c(), hw = z.h() * z.w();
  const long h = static_cast<long>(z.h()), w = static_cast<long>(z.w());
  std::vector<double> buf(hw * c * nb);
  auto slot = [&](std::size_t pixel, std::size_t ch) { return buf.data() + (pixel * c + ch) * nb; };

  for (std::size_t k = 0; k < nb; ++k) {
    const double* src = z.example(begin + k).data();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) slot(p, ch)[k] = src[ch * hw + p];
  }

  raster_sweep(variant, z.h(), z.w(), c, [&](std::size_t j, std::size_t i, std::size_t co) {
    double* acc = slot(j * z.w() + i, co);
    for (const Tap& tap : plan.taps[co]) {
      const long sy = static_cast<long>(j) + tap.oy, sx = static_cast<long>(i) + tap.ox;
      if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
      const double* known = slot(static_cast<std::size_t>(sy * w + sx), tap.ci);
      const double wt = tap.weight;
      for (std::size_t k = 0; k < nb; ++k) acc[k] -= wt * known[k];
    }
    const double inv = plan.inv_diag[co];
    for (std::size_t k = 0; k < nb; ++k) acc[k] *= inv;
  });

  for (std::size_t k = 0; k < nb; ++k) {
    double* dst = x.example(begin + k).data();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) dst[ch * hw + p] = slot(p, ch)[k];
  }
}

}  // namespace

void check_autoregressive(const Filter& f, MaskVariant variant) {
  if (f.c_in() != f.c_out()) throw std::invalid_argument("autoregressive filter must be square in channels");
  const auto [cy, cx] = f.center();
  for (std::size_t co = 0; co < f.c_out(); ++co)
    for (std::size_t ci = 0; ci < f.c_in(); ++ci)
      for (std::size_t dy = 0; dy < f.kh(); ++dy)
        for (std::size_t dx = 0; dx < f.kw(); ++dx) {
          if (f(co, ci, dy, dx) == 0.0 || (ci == co && dy == cy && dx == cx)) continue;
          const long oy = static_cast<long>(dy) - static_cast<long>(cy);
          const long ox = static_cast<long>(dx) - static_cast<long>(cx);
          if (!precedes(variant, oy, ox, ci, co)) {
            throw std::invalid_argument("filter tap (" + std::to_string(co) + ", " + std::to_string(ci) + ", " +
                                        std::to_string(dy) + ", " + std::to_string(dx) + ") violates " +
                                        to_string(variant) + " ordering");
          }
        }
  for (std::size_t c = 0; c < f.c_out(); ++c) {
    if (std::abs(f(c, c, cy, cx)) <= 1e-12) {
      throw NonInvertibleError(c, "autoregressive filter has a zero diagonal tap in channel " + std::to_string(c));
    }
  }
}

Tensor4 solve_autoregressive(const Tensor4& z, const Filter& f, MaskVariant variant, SubstitutionMode mode,
                             std::size_t workers) {
  if (f.c_out() != z.c()) {
    throw std::invalid_argument("solve_autoregressive: filter has " + std::to_string(f.c_out()) +
                                " channels, input has " + std::to_string(z.c()));
  }
  const Plan plan = make_plan(f, variant);
  Tensor4 x(z.shape());
  if (mode == SubstitutionMode::Sequential) {
    for (std::size_t n = 0; n < z.n(); ++n) solve_sequential(z, plan, variant, x, n);
    return x;
  }
  if (workers == 0) workers = worker_count();
  parallel_for(z.n(), workers, [&](std::size_t begin, std::size_t end) {
    solve_batched(z, plan, variant, x, begin, end);
  });
  return x;
}

}  // namespace flowforge
