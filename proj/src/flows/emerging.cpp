#include <cmath>

#include "flowforge/flows.hpp"

namespace flowforge {
namespace {

constexpr double kMinLogAbsDet = -69.07755278982137;  // log(1e-30)

std::vector<std::size_t> diagonal_taps(const Filter& mask) {
  const auto [cy, cx] = mask.center();
  std::vector<std::size_t> idx;
  for (std::size_t c = 0; c < mask.c_out(); ++c) idx.push_back(mask.taps().index(c, c, cy, cx));
  return idx;
}

void require_nonzero_diagonal(const std::string& layer, const Parameter& k, const Filter& mask) {
  const auto idx = diagonal_taps(mask);
  for (std::size_t c = 0; c < idx.size(); ++c)
    if (std::abs(k.value[idx[c]]) <= 1e-12) {
      throw LayerNotInvertible(layer, k.name + " has a zero diagonal tap in channel " + std::to_string(c));
    }
}

Filter masked(const Parameter& p, const Filter& mask) {
  Tensor4 taps = p.value;
  for (std::size_t i = 0; i < taps.size(); ++i) taps[i] *= mask.taps()[i];
  return Filter(std::move(taps), mask.pad());
}

}  // namespace

Emerging::Emerging(std::string name, std::size_t channels, std::size_t kernel, std::mt19937_64& rng)
    : Layer(name), channels_(channels), p_((kernel + 1) / 2) {
  if (kernel % 2 == 0) throw std::invalid_argument(name_ + ": emerging kernel size must be odd, got " + std::to_string(kernel));
  m1_ = build_autoregressive_mask(MaskVariant::Lower, p_, channels);
  m2_ = build_autoregressive_mask(MaskVariant::Upper, p_, channels);
  w_ = make_matrix_parameter(name + ".W", channels, channels);
  const RMatrix r = random_rotation(channels, rng);
  std::copy(r.data().begin(), r.data().end(), w_.value.data().begin());

  std::normal_distribution<double> nd(0.0, 0.05);
  k1_ = make_filter_parameter(name + ".k1", {channels, channels, p_, p_});
  k2_ = make_filter_parameter(name + ".k2", {channels, channels, p_, p_});
  for (Parameter* k : {&k1_, &k2_}) {
    const Filter& mask = k == &k1_ ? m1_ : m2_;
    for (std::size_t i = 0; i < k->value.size(); ++i) k->value[i] = mask.taps()[i] * nd(rng);
    for (std::size_t i : diagonal_taps(mask)) k->value[i] = 1.0;
  }
}

Filter Emerging::lower_filter() const { return masked(k1_, m1_); }
Filter Emerging::upper_filter() const { return masked(k2_, m2_); }

std::pair<Var, Var> Emerging::forward(Tape& tape, Var x) {
  if (x.shape().c != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const Var w = tape.parameter(w_);
  const Var lw = ad::logabsdet(w);
  if (!(lw.value().item() >= kMinLogAbsDet)) throw LayerNotInvertible(name_, "|det W| < 1e-30, W is not invertible");
  require_nonzero_diagonal(name_, k1_, m1_);
  require_nonzero_diagonal(name_, k2_, m2_);
  const Var k1 = ad::mul(tape.parameter(k1_), tape.constant(m1_.taps()));
  const Var k2 = ad::mul(tape.parameter(k2_), tape.constant(m2_.taps()));

  Var y = ad::pixel_matmul(x, w);
  y = ad::conv2d(y, k1, m1_.pad(), Boundary::Zero);
  y = ad::conv2d(y, k2, m2_.pad(), Boundary::Zero);

  const Var per_pixel = ad::add(lw, ad::add(ad::logabs_select(k1, diagonal_taps(m1_)), ad::logabs_select(k2, diagonal_taps(m2_))));
  const double hw = static_cast<double>(x.shape().plane());
  return {y, ad::expand_batch(ad::scale(per_pixel, hw), x.shape().n)};
}

FlowResult Emerging::inverse(const Tensor4& y) {
  if (y.c() != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const Filter k1 = lower_filter(), k2 = upper_filter();
  const RMatrix w(channels_, channels_, std::vector<double>(w_.value.data().begin(), w_.value.data().end()));
  const auto sd = lu_slogdet(w);
  if (!(sd.logabsdet >= kMinLogAbsDet)) throw LayerNotInvertible(name_, "|det W| < 1e-30, W is not invertible");

  Tensor4 x;
  try {
    x = solve_autoregressive(y, k2, MaskVariant::Upper);
    x = solve_autoregressive(x, k1, MaskVariant::Lower);
  } catch (const NonInvertibleError& e) {
    throw LayerNotInvertible(name_, e.what());
  }
  const RMatrix inv = flowforge::inverse(w);
  x = conv2d(x, Filter(Tensor4({channels_, channels_, 1, 1}, std::vector<double>(inv.data().begin(), inv.data().end())), {}),
             Boundary::Zero);

  double per_pixel = sd.logabsdet;
  for (const Filter* k : {&k1, &k2}) {
    const auto [cy, cx] = k->center();
    for (std::size_t c = 0; c < channels_; ++c) per_pixel += std::log(std::abs((*k)(c, c, cy, cx)));
  }
  return {std::move(x), std::vector<double>(y.n(), -static_cast<double>(y.h() * y.w()) * per_pixel)};
}

}  // namespace flowforge
