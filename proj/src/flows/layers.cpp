#include <cmath>

#include "flowforge/flows.hpp"

namespace flowforge {
namespace {

constexpr Padding kSame3{1, 1, 1, 1};

std::vector<double> per_example(const Tensor4& t) { return {t.data().begin(), t.data().end()}; }

void fill_normal(Tensor4& t, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std);
  for (auto& v : t.data()) v = nd(rng);
}

}  // namespace

FlowResult Layer::apply(const Tensor4& x, Direction dir) {
  if (dir == Direction::Inverse) return inverse(x);
  Tape t(false);
  const auto [y, ld] = forward(t, t.constant(x));
  return {y.value(), per_example(ld.value())};
}

RMatrix random_rotation(std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> vs(c, std::vector<double>(c));
  for (auto& v : vs)
    for (auto& x : v) x = nd(rng);
  return householder_orthogonal(c, vs);
}

// ---------------------------------------------------------------- actnorm

Actnorm::Actnorm(std::string name, std::size_t channels)
    : Layer(name),
      log_scale_(make_vector_parameter(name + ".log_scale", channels)),
      bias_(make_vector_parameter(name + ".bias", channels)),
      initialized_(make_vector_parameter(name + ".initialized", 1)) {
  initialized_.trainable = false;
}

void Actnorm::initialize(const Tensor4& x) {
  const std::size_t c = x.c(), hw = x.h() * x.w();
  const double count = static_cast<double>(x.n() * hw);
  for (std::size_t k = 0; k < c; ++k) {
    double mean = 0.0;
    for (std::size_t n = 0; n < x.n(); ++n)
      for (std::size_t i = 0; i < hw; ++i) mean += x.example(n)[k * hw + i];
    mean /= count;
    double var = 0.0;
    for (std::size_t n = 0; n < x.n(); ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = x.example(n)[k * hw + i] - mean;
        var += d * d;
      }
    const double scale = 1.0 / (std::sqrt(var / count) + 1e-6);
    log_scale_.value[k] = std::log(scale);
    bias_.value[k] = -mean * scale;
  }
  initialized_.value[0] = 1.0;
  log_scale_.bump();
  bias_.bump();
  initialized_.bump();
}

std::pair<Var, Var> Actnorm::forward(Tape& tape, Var x) {
  if (x.shape().c != log_scale_.value.size()) throw std::invalid_argument(name_ + ": channel mismatch");
  if (!initialized()) initialize(x.value());
  const Var ls = tape.parameter(log_scale_);
  const Var y = ad::affine_channel(x, ad::exp(ls), tape.parameter(bias_));
  const double hw = static_cast<double>(x.shape().plane());
  return {y, ad::expand_batch(ad::scale(ad::sum(ls), hw), x.shape().n)};
}

FlowResult Actnorm::inverse(const Tensor4& y) {
  const std::size_t c = y.c(), hw = y.h() * y.w();
  if (c != log_scale_.value.size()) throw std::invalid_argument(name_ + ": channel mismatch");
  Tensor4 x(y.shape());
  double total = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double gamma = std::exp(log_scale_.value[k]);
    if (gamma == 0.0 || !std::isfinite(gamma)) {
      throw LayerNotInvertible(name_, "scale of channel " + std::to_string(k) + " is not invertible");
    }
    total += log_scale_.value[k];
    for (std::size_t n = 0; n < y.n(); ++n)
      for (std::size_t i = 0; i < hw; ++i) x.example(n)[k * hw + i] = (y.example(n)[k * hw + i] - bias_.value[k]) / gamma;
  }
  return {std::move(x), std::vector<double>(y.n(), -static_cast<double>(hw) * total)};
}

// --------------------------------------------------------------- coupling

Coupling::Coupling(std::string name, std::size_t channels, std::size_t width, std::mt19937_64& rng)
    : Layer(name),
      channels_(channels),
      w0_(make_filter_parameter(name + ".conv0.weight", {width, channels / 2, 3, 3})),
      b0_(make_vector_parameter(name + ".conv0.bias", width)),
      w1_(make_filter_parameter(name + ".conv1.weight", {width, width, 1, 1})),
      b1_(make_vector_parameter(name + ".conv1.bias", width)),
      w2_(make_filter_parameter(name + ".conv2.weight", {channels, width, 3, 3})),
      b2_(make_vector_parameter(name + ".conv2.bias", channels)) {
  if (channels % 2 != 0 || channels == 0) {
    throw std::invalid_argument(name_ + ": coupling needs an even channel count, got " + std::to_string(channels));
  }
  fill_normal(w0_.value, 0.05, rng);
  fill_normal(w1_.value, 0.05, rng);
}

std::vector<Parameter*> Coupling::parameters() { return {&w0_, &b0_, &w1_, &b1_, &w2_, &b2_}; }

std::pair<Var, Var> Coupling::conditioner(Tape& tape, Var xb) {
  Var h = ad::relu(ad::add_channel(ad::conv2d(xb, tape.parameter(w0_), kSame3, Boundary::Zero), tape.parameter(b0_)));
  h = ad::relu(ad::add_channel(ad::conv2d(h, tape.parameter(w1_), {}, Boundary::Zero), tape.parameter(b1_)));
  const Var out = ad::add_channel(ad::conv2d(h, tape.parameter(w2_), kSame3, Boundary::Zero), tape.parameter(b2_));
  const std::size_t half = channels_ / 2;
  return {ad::sigmoid(ad::add_scalar(ad::slice_channels(out, 0, half), 2.0)), ad::slice_channels(out, half, half)};
}

std::pair<Var, Var> Coupling::forward(Tape& tape, Var x) {
  if (x.shape().c != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const std::size_t half = channels_ / 2;
  const Var xa = ad::slice_channels(x, 0, half), xb = ad::slice_channels(x, half, half);
  const auto [s, t] = conditioner(tape, xb);
  const Var y = ad::concat_channels(ad::add(ad::mul(xa, s), t), xb);
  return {y, ad::sum_per_example(ad::log(s))};
}

FlowResult Coupling::inverse(const Tensor4& y) {
  if (y.c() != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const std::size_t half = channels_ / 2;
  Tape tape(false);
  const Var yv = tape.constant(y);
  const Var ya = ad::slice_channels(yv, 0, half), yb = ad::slice_channels(yv, half, half);
  const auto [s, t] = conditioner(tape, yb);
  Tensor4 xa = ya.value();
  for (std::size_t i = 0; i < xa.size(); ++i) xa[i] = (xa[i] - t.value()[i]) / s.value()[i];
  const Var x = ad::concat_channels(tape.constant(std::move(xa)), yb);
  const Tensor4 ld = ad::sum_per_example(ad::log(s)).value();
  std::vector<double> neg(ld.size());
  for (std::size_t i = 0; i < ld.size(); ++i) neg[i] = -ld[i];
  return {x.value(), std::move(neg)};
}

// ---------------------------------------------------------------- squeeze

std::pair<Var, Var> Squeeze::forward(Tape& tape, Var x) {
  return {ad::squeeze2x2(x), tape.constant(Tensor4({x.shape().n, 1, 1, 1}))};
}

FlowResult Squeeze::inverse(const Tensor4& y) {
  Tape t(false);
  return {ad::unsqueeze2x2(t.constant(y)).value(), std::vector<double>(y.n(), 0.0)};
}

// ------------------------------------------------------------------ split

Split::Split(std::string name, std::size_t channels)
    : name_(name),
      channels_(channels),
      w_(make_filter_parameter(name + ".prior.weight", {channels, channels / 2, 3, 3})),
      b_(make_vector_parameter(name + ".prior.bias", channels)) {
  if (channels % 2 != 0 || channels == 0) {
    throw std::invalid_argument(name_ + ": split needs an even channel count, got " + std::to_string(channels));
  }
}

Split::Forward Split::forward(Tape& tape, Var x) {
  if (x.shape().c != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const std::size_t half = channels_ / 2;
  const Var kept = ad::slice_channels(x, 0, half), z = ad::slice_channels(x, half, half);
  const Var h = ad::add_channel(ad::conv2d(kept, tape.parameter(w_), kSame3, Boundary::Zero), tape.parameter(b_));
  const Var logp = ad::gaussian_logp(z, ad::slice_channels(h, 0, half), ad::slice_channels(h, half, half));
  return {kept, logp, z};
}

std::pair<Tensor4, Tensor4> Split::prior(const Tensor4& kept) {
  if (kept.c() * 2 != channels_) throw std::invalid_argument(name_ + ": kept half has wrong channel count");
  Tape t(false);
  const std::size_t half = channels_ / 2;
  const Var h = ad::add_channel(ad::conv2d(t.constant(kept), t.parameter(w_), kSame3, Boundary::Zero), t.parameter(b_));
  return {ad::slice_channels(h, 0, half).value(), ad::slice_channels(h, half, half).value()};
}

Tensor4 Split::inverse(const Tensor4& kept, const Tensor4& z) {
  if (z.shape() != kept.shape()) {
    throw std::invalid_argument(name_ + ": missing or mis-shaped z component " + to_string(z.shape()));
  }
  Tape t(false);
  return ad::concat_channels(t.constant(kept), t.constant(z)).value();
}

Tensor4 Split::sample(const Tensor4& kept, double temperature, std::mt19937_64& rng) {
  auto [mean, logs] = prior(kept);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += temperature * std::exp(logs[i]) * nd(rng);
  return mean;
}

}  // namespace flowforge
