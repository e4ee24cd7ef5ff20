#include "flowforge/convkit.hpp"

namespace flowforge {

Filter build_autoregressive_mask(MaskVariant variant, std::size_t p, std::size_t channels) {
  if (p == 0 || channels == 0) throw std::invalid_argument("build_autoregressive_mask: p and c must be >= 1");
  Tensor4 taps({channels, channels, p, p}, 1.0);
  const std::size_t center = variant == MaskVariant::Lower ? p - 1 : 0;
  for (std::size_t co = 0; co < channels; ++co) {
    for (std::size_t ci = 0; ci < channels; ++ci) {
      const bool allowed = variant == MaskVariant::Lower ? ci <= co : ci >= co;
      taps(co, ci, center, center) = allowed ? 1.0 : 0.0;
    }
  }
  const Padding pad = variant == MaskVariant::Lower ? Padding{p - 1, 0, p - 1, 0} : Padding{0, p - 1, 0, p - 1};
  return Filter(std::move(taps), pad);
}

Filter combine_filters(const Filter& k2, const Filter& k1) {
  if (k2.c_in() != k1.c_out()) {
    throw std::invalid_argument("combine_filters: outer filter expects " + std::to_string(k2.c_in()) +
                                " channels, inner filter produces " + std::to_string(k1.c_out()));
  }
  const std::size_t kh = k1.kh() + k2.kh() - 1, kw = k1.kw() + k2.kw() - 1;
  Tensor4 taps({k2.c_out(), k1.c_in(), kh, kw});
  // Tap offsets add, so the combined taps are the full convolution of the
  // two tap arrays, contracted over the intermediate channel.
  for (std::size_t co = 0; co < k2.c_out(); ++co)
    for (std::size_t m = 0; m < k2.c_in(); ++m)
      for (std::size_t by = 0; by < k2.kh(); ++by)
        for (std::size_t bx = 0; bx < k2.kw(); ++bx) {
          const double outer = k2(co, m, by, bx);
          if (outer == 0.0) continue;
          for (std::size_t ci = 0; ci < k1.c_in(); ++ci)
            for (std::size_t ay = 0; ay < k1.kh(); ++ay)
              for (std::size_t ax = 0; ax < k1.kw(); ++ax)
                taps(co, ci, ay + by, ax + bx) += outer * k1(m, ci, ay, ax);
        }
  const Padding pad{k1.pad().top + k2.pad().top, k1.pad().bottom + k2.pad().bottom,
                    k1.pad().left + k2.pad().left, k1.pad().right + k2.pad().right};
  return Filter(std::move(taps), pad);
}

}  // namespace flowforge
