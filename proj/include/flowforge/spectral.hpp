#pragma once

// Wrap-around convolution diagonalized by the 2-D DFT: one c_out×c_in
// complex block per frequency (u, v).

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/convkit.hpp"

namespace flowforge {

struct FilterSpectrum {
  std::size_t h = 0, w = 0;
  std::vector<CMatrix> blocks;  // index u·w + v

  const CMatrix& at(std::size_t u, std::size_t v) const { return blocks[u * w + v]; }
};

/// Ŵ_uv[co, ci] = Σ_taps f·exp(+2πi(u·oy/h + v·ox/w)) with (oy, ox) the tap
/// offset from the center. Computed by embedding each reflected filter at
/// wrapped coordinates and transforming; taps that land on the same wrapped
/// offset (h or w smaller than the filter) accumulate.
FilterSpectrum filter_spectrum(const Filter& f, std::size_t h, std::size_t w);

/// Σ_uv log|det Ŵ_uv|, -inf when any block is singular.
double spectral_logdet(const FilterSpectrum& s);

/// Raised when a frequency block cannot be inverted.
class SingularFrequencyError : public std::runtime_error {
 public:
  SingularFrequencyError(std::size_t u, std::size_t v)
      : std::runtime_error("periodic convolution is singular at frequency (" + std::to_string(u) + ", " +
                           std::to_string(v) + ")"),
        u_(u), v_(v) {}
  std::size_t u() const noexcept { return u_; }
  std::size_t v() const noexcept { return v_; }

 private:
  std::size_t u_, v_;
};

/// Per-frequency inverses Ŵ_uv⁻¹; throws SingularFrequencyError.
FilterSpectrum invert_spectrum(const FilterSpectrum& s);

/// z = idft2(Ŵ_uv · dft2(x)) per example; equals conv2d(x, f, Wrap).
Tensor4 spectral_apply(const Tensor4& x, const FilterSpectrum& s);

/// ∂/∂f of Σ_uv log|det Ŵ_uv|: Re Σ_uv (Ŵ_uv⁻¹)[ci, co]·exp(+2πi(u·oy/h + v·ox/w)).
Tensor4 spectral_logdet_grad(const Filter& f, const FilterSpectrum& inverse);

}  // namespace flowforge
