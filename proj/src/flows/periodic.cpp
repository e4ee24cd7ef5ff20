#include "flowforge/flows.hpp"

namespace flowforge {

Periodic::Periodic(std::string name, std::size_t channels, std::size_t kernel, std::mt19937_64& rng)
    : Layer(name), channels_(channels) {
  if (kernel % 2 == 0) throw std::invalid_argument(name_ + ": periodic kernel size must be odd, got " + std::to_string(kernel));
  f_ = make_filter_parameter(name + ".weight", {channels, channels, kernel, kernel});
  // Identity plus small noise keeps every frequency block well away from singular.
  std::normal_distribution<double> nd(0.0, 0.01);
  for (auto& v : f_.value.data()) v = nd(rng);
  for (std::size_t c = 0; c < channels; ++c) f_.value(c, c, kernel / 2, kernel / 2) += 1.0;
}

Filter Periodic::filter() const { return Filter::centered(f_.value); }

std::pair<Var, Var> Periodic::forward(Tape& tape, Var x) {
  if (x.shape().c != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const Var f = tape.parameter(f_);
  const Padding pad = filter().pad();
  const Var y = ad::periodic_conv(x, f, pad);
  return {y, ad::expand_batch(ad::periodic_logdet(f, pad, x.shape().h, x.shape().w), x.shape().n)};
}

void Periodic::clear_cache() {
  std::lock_guard lock(cache_mutex_);
  cache_.reset();
}

bool Periodic::cache_valid(std::size_t h, std::size_t w) const {
  std::lock_guard lock(cache_mutex_);
  return cache_ && cache_->version == f_.version && cache_->h == h && cache_->w == w;
}

Periodic::Cache Periodic::cached_inverse(std::size_t h, std::size_t w) {
  std::lock_guard lock(cache_mutex_);
  if (cache_ && cache_->version == f_.version && cache_->h == h && cache_->w == w) return *cache_;
  const FilterSpectrum s = filter_spectrum(filter(), h, w);
  try {
    cache_ = Cache{f_.version, h, w, std::make_shared<const FilterSpectrum>(invert_spectrum(s)), spectral_logdet(s)};
  } catch (const SingularFrequencyError& e) {
    throw LayerNotInvertible(name_, e.what());
  }
  return *cache_;
}

FlowResult Periodic::inverse(const Tensor4& y) {
  if (y.c() != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const Cache c = cached_inverse(y.h(), y.w());
  return {spectral_apply(y, *c.inverse), std::vector<double>(y.n(), -c.logdet)};
}

}  // namespace flowforge
