#include <cmath>

#include "flowforge/flows.hpp"

namespace flowforge {
namespace {

// Strictly lower (lower = true) or strictly upper triangular 0/1 matrix.
Tensor4 strict_mask(std::size_t c, bool lower) {
  Tensor4 m({1, 1, c, c});
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t k = 0; k < c; ++k)
      if (lower ? k < r : k > r) m[r * c + k] = 1.0;
  return m;
}

Tensor4 identity_tensor(std::size_t c) {
  Tensor4 m({1, 1, c, c});
  for (std::size_t i = 0; i < c; ++i) m[i * c + i] = 1.0;
  return m;
}

RMatrix to_matrix(const Tensor4& t) { return RMatrix(t.h(), t.w(), std::vector<double>(t.data().begin(), t.data().end())); }

constexpr double kMinLogAbsDet = -69.07755278982137;  // log(1e-30)

}  // namespace

const char* to_string(Inv1x1Variant v) {
  switch (v) {
    case Inv1x1Variant::Plain: return "plain";
    case Inv1x1Variant::PLU: return "plu";
    case Inv1x1Variant::QR: return "qr";
  }
  return "unknown";
}

Inv1x1::Inv1x1(std::string name, std::size_t channels, Inv1x1Variant variant, std::mt19937_64& rng,
               std::size_t num_reflections)
    : Layer(name), channels_(channels), variant_(variant), reflections_(num_reflections) {
  const std::size_t c = channels;
  switch (variant) {
    case Inv1x1Variant::Plain: {
      w_ = make_matrix_parameter(name + ".W", c, c);
      const RMatrix r = random_rotation(c, rng);
      std::copy(r.data().begin(), r.data().end(), w_.value.data().begin());
      break;
    }
    case Inv1x1Variant::PLU: {
      p_ = make_matrix_parameter(name + ".P", c, c);
      l_ = make_matrix_parameter(name + ".L", c, c);
      u_ = make_matrix_parameter(name + ".U", c, c);
      sign_ = make_vector_parameter(name + ".sign", c);
      log_s_ = make_vector_parameter(name + ".log_s", c);
      p_.trainable = sign_.trainable = false;
      const auto lu = lu_factor(random_rotation(c, rng));
      for (std::size_t i = 0; i < c; ++i) {
        p_.value[lu.perm[i] * c + i] = 1.0;
        for (std::size_t k = 0; k < c; ++k) {
          if (k < i) l_.value[i * c + k] = lu.packed(i, k);
          if (k > i) u_.value[i * c + k] = lu.packed(i, k);
        }
        const double s = lu.packed(i, i);
        sign_.value[i] = s < 0.0 ? -1.0 : 1.0;
        log_s_.value[i] = std::log(std::abs(s));
      }
      break;
    }
    case Inv1x1Variant::QR: {
      if (reflections_ == kDefaultReflections) reflections_ = c;
      v_ = make_matrix_parameter(name + ".reflections", reflections_, c);
      u_ = make_matrix_parameter(name + ".R", c, c);
      sign_ = make_vector_parameter(name + ".sign", c, 1.0);
      log_s_ = make_vector_parameter(name + ".log_s", c);
      sign_.trainable = false;
      std::normal_distribution<double> nd;
      for (auto& x : v_.value.data()) x = nd(rng);
      break;
    }
  }
}

std::vector<Parameter*> Inv1x1::parameters() {
  switch (variant_) {
    case Inv1x1Variant::Plain: return {&w_};
    case Inv1x1Variant::PLU: return {&l_, &u_, &log_s_, &p_, &sign_};
    case Inv1x1Variant::QR: return {&v_, &u_, &log_s_, &sign_};
  }
  return {};
}

Var Inv1x1::compose(Tape& tape) {
  const std::size_t c = channels_;
  if (variant_ == Inv1x1Variant::Plain) return tape.parameter(w_);
  const Var diag = ad::diag(ad::mul(tape.parameter(sign_), ad::exp(tape.parameter(log_s_))));
  const Var upper = ad::add(ad::mul(tape.parameter(u_), tape.constant(strict_mask(c, false))), diag);
  if (variant_ == Inv1x1Variant::PLU) {
    const Var lower = ad::add(ad::mul(tape.parameter(l_), tape.constant(strict_mask(c, true))),
                              tape.constant(identity_tensor(c)));
    return ad::matmul(tape.parameter(p_), ad::matmul(lower, upper));
  }
  // A QR layer constructed with zero reflections has an identity Q.
  if (v_.value.empty()) return upper;
  return ad::matmul(ad::householder(tape.parameter(v_)), upper);
}

Var Inv1x1::logdet_per_pixel(Tape& tape, Var w) {
  if (variant_ == Inv1x1Variant::Plain) {
    const Var l = ad::logabsdet(w);
    if (!(l.value().item() >= kMinLogAbsDet)) throw LayerNotInvertible(name_, "|det W| < 1e-30, W is not invertible");
    return l;
  }
  return ad::sum(tape.parameter(log_s_));
}

std::pair<Var, Var> Inv1x1::forward(Tape& tape, Var x) {
  if (x.shape().c != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  const Var w = compose(tape);
  const Var y = ad::pixel_matmul(x, w);
  const double hw = static_cast<double>(x.shape().plane());
  return {y, ad::expand_batch(ad::scale(logdet_per_pixel(tape, w), hw), x.shape().n)};
}

RMatrix Inv1x1::weight() {
  Tape t(false);
  return to_matrix(compose(t).value());
}

double Inv1x1::logabsdet_weight() {
  Tape t(false);
  return logdet_per_pixel(t, compose(t)).value().item();
}

FlowResult Inv1x1::inverse(const Tensor4& y) {
  if (y.c() != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
  Tape t(false);
  const Var w = compose(t);
  const double l = logdet_per_pixel(t, w).value().item();
  RMatrix inv;
  try {
    inv = flowforge::inverse(to_matrix(w.value()));
  } catch (const SingularMatrixError& e) {
    throw LayerNotInvertible(name_, e.what());
  }
  const Filter f(Tensor4({channels_, channels_, 1, 1}, std::vector<double>(inv.data().begin(), inv.data().end())), {});
  return {conv2d(y, f, Boundary::Zero), std::vector<double>(y.n(), -static_cast<double>(y.h() * y.w()) * l)};
}

}  // namespace flowforge
