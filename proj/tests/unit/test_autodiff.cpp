#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "flowforge/autodiff.hpp"
#include "flowforge/spectral.hpp"
#include "oracles.hpp"

using namespace flowforge;

namespace {

using Build = std::function<Var(std::vector<Var>&)>;

Parameter random_param(std::string name, Shape4 s, std::mt19937_64& rng, double scale = 1.0) {
  return {std::move(name), oracle::random_tensor(s, rng, scale), 4};
}

// Max relative error of every input gradient of `build`, contracted with a
// fixed random weighting so no output entry is left untested.
double op_error(const Build& build, std::vector<Parameter>& inputs, std::mt19937_64& rng) {
  Tensor4 weights;
  {
    Tape probe(false);
    std::vector<Var> in;
    for (auto& p : inputs) in.push_back(probe.parameter(p));
    weights = oracle::random_tensor(build(in).shape(), rng);
  }
  std::vector<Parameter*> ptrs;
  for (auto& p : inputs) ptrs.push_back(&p);
  const auto fn = [&](Tape& t) {
    std::vector<Var> in;
    for (auto& p : inputs) in.push_back(t.parameter(p));
    return ad::sum(ad::mul(build(in), t.constant(weights)));
  };
  return grad_check(fn, ptrs).max_rel_error;
}

}  // namespace

TEST_CASE("add of a zero constant records one node and returns the input") {
  Tape t;
  const Var x = t.leaf(Tensor4({1, 1, 2, 2}, 3.0));
  const Var zero = t.constant(Tensor4({1, 1, 2, 2}));
  const std::size_t before = t.size();
  const Var y = ad::add(x, zero);
  CHECK(t.size() == before + 1);
  CHECK(y.value() == x.value());
  CHECK(t.kind(y) == OpKind::Add);
}

TEST_CASE("d(x·y)/dx == y") {
  std::mt19937_64 rng(1);
  Tape t;
  const Var x = t.leaf(oracle::random_tensor({1, 2, 2, 2}, rng));
  const Var y = t.leaf(oracle::random_tensor({1, 2, 2, 2}, rng), false);
  const GradientMap g = t.backward(ad::sum(ad::mul(x, y)));
  CHECK(g[x] == y.value());
  CHECK_THROWS(g[y]);
}

TEST_CASE("sum backward gives all ones") {
  Tape t;
  const Var x = t.leaf(Tensor4({2, 3, 1, 4}, 0.5));
  const GradientMap g = t.backward(ad::sum(x));
  CHECK(g[x] == Tensor4({2, 3, 1, 4}, 1.0));
}

TEST_CASE("log|det W| at diag(2, 4) has gradient diag(1/2, 1/4)") {
  Parameter w = make_matrix_parameter("W", 2, 2);
  w.value[0] = 2.0;
  w.value[3] = 4.0;
  Tape t;
  const Var l = ad::logabsdet(t.parameter(w));
  CHECK(l.value().item() == doctest::Approx(std::log(8.0)));
  const Tensor4 g = t.backward(l)[w];
  CHECK(g[0] == 0.5);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.25);
}

TEST_CASE("determinant gradient equals the inverse transpose") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Parameter w = make_matrix_parameter("W", 3, 3);
    w.value = oracle::random_tensor({1, 1, 3, 3}, rng);
    Tape t;
    const Tensor4 g = t.backward(ad::logabsdet(t.parameter(w)))[w];
    RMatrix m(3, 3, std::vector<double>(w.value.data().begin(), w.value.data().end()));
    const RMatrix expected = inverse(m).transpose();
    for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(g[i] - expected.data()[i]) < 1e-9);
  }
}

TEST_CASE("conv2d filter gradient matches finite differences on a 1x2x3x3 input") {
  std::mt19937_64 rng(3);
  const Tensor4 x = oracle::random_tensor({1, 2, 3, 3}, rng);
  const Tensor4 r = oracle::random_tensor({1, 2, 3, 3}, rng);
  Parameter f = random_param("f", {2, 2, 3, 3}, rng);
  Parameter* ps[] = {&f};
  const auto report = grad_check(
      [&](Tape& t) {
        return ad::sum(ad::mul(ad::conv2d(t.constant(x), t.parameter(f), {1, 1, 1, 1}, Boundary::Zero), t.constant(r)));
      },
      ps, 1e-5);
  CHECK(report.max_rel_error < 1e-5);
  CHECK(report.coordinates == 36);
}

TEST_CASE("every backward rule passes grad_check") {
  std::mt19937_64 rng(4);
  const Shape4 s{2, 2, 2, 2};
  auto P = [&](std::string name, Shape4 sh, double scale = 1.0) { return random_param(std::move(name), sh, rng, scale); };

  SUBCASE("linear ops") {
    struct Case {
      const char* name;
      std::vector<Parameter> in;
      Build build;
    };
    std::vector<Case> cases;
    cases.push_back({"add", {P("a", s), P("b", s)}, [](auto& v) { return ad::add(v[0], v[1]); }});
    cases.push_back({"sub", {P("a", s), P("b", s)}, [](auto& v) { return ad::sub(v[0], v[1]); }});
    cases.push_back({"scale", {P("a", s)}, [](auto& v) { return ad::scale(v[0], -1.7); }});
    cases.push_back({"add_scalar", {P("a", s)}, [](auto& v) { return ad::add_scalar(v[0], 2.5); }});
    cases.push_back({"sum_per_example", {P("a", s)}, [](auto& v) { return ad::sum_per_example(v[0]); }});
    cases.push_back({"expand_batch", {P("a", {1, 1, 1, 1})}, [](auto& v) { return ad::expand_batch(v[0], 3); }});
    cases.push_back({"slice", {P("a", {2, 4, 2, 3})}, [](auto& v) { return ad::slice_channels(v[0], 1, 2); }});
    cases.push_back({"concat", {P("a", s), P("b", {2, 3, 2, 2})}, [](auto& v) { return ad::concat_channels(v[0], v[1]); }});
    cases.push_back({"squeeze", {P("a", {2, 2, 4, 2})}, [](auto& v) { return ad::squeeze2x2(v[0]); }});
    cases.push_back({"unsqueeze", {P("a", {1, 8, 1, 2})}, [](auto& v) { return ad::unsqueeze2x2(v[0]); }});
    cases.push_back({"reshape", {P("a", s)}, [](auto& v) { return ad::reshape(v[0], {1, 1, 4, 4}); }});
    cases.push_back({"diag", {P("a", {1, 1, 1, 3})}, [](auto& v) { return ad::diag(v[0]); }});
    cases.push_back({"add_channel", {P("x", s), P("b", {1, 1, 1, 2})}, [](auto& v) { return ad::add_channel(v[0], v[1]); }});
    cases.push_back({"conv2d zero", {P("x", {2, 2, 3, 4}), P("f", {3, 2, 2, 2})},
                     [](auto& v) { return ad::conv2d(v[0], v[1], {1, 0, 0, 1}, Boundary::Zero); }});
    cases.push_back({"conv2d wrap", {P("x", {2, 2, 3, 4}), P("f", {2, 2, 3, 3})},
                     [](auto& v) { return ad::conv2d(v[0], v[1], {1, 1, 1, 1}, Boundary::Wrap); }});
    cases.push_back({"periodic_conv", {P("x", {2, 2, 3, 4}), P("f", {2, 2, 3, 3})},
                     [](auto& v) { return ad::periodic_conv(v[0], v[1], {1, 1, 1, 1}); }});
    for (auto& c : cases) {
      INFO(c.name);
      CHECK(op_error(c.build, c.in, rng) < 1e-7);
    }
  }

  SUBCASE("nonlinear ops") {
    struct Case {
      const char* name;
      std::vector<Parameter> in;
      Build build;
    };
    std::vector<Case> cases;
    cases.push_back({"mul", {P("a", s), P("b", s)}, [](auto& v) { return ad::mul(v[0], v[1]); }});
    cases.push_back({"exp", {P("a", s)}, [](auto& v) { return ad::exp(v[0]); }});
    cases.push_back({"log", {P("a", s)}, [](auto& v) { return ad::log(ad::add_scalar(ad::mul(v[0], v[0]), 0.5)); }});
    cases.push_back({"sigmoid", {P("a", s)}, [](auto& v) { return ad::sigmoid(v[0]); }});
    cases.push_back({"relu", {P("a", s)}, [](auto& v) { return ad::relu(v[0]); }});
    cases.push_back({"pixel_matmul", {P("x", {2, 3, 2, 2}), P("w", {1, 1, 2, 3})},
                     [](auto& v) { return ad::pixel_matmul(v[0], v[1]); }});
    cases.push_back({"affine_channel", {P("x", s), P("s", {1, 1, 1, 2}), P("b", {1, 1, 1, 2})},
                     [](auto& v) { return ad::affine_channel(v[0], v[1], v[2]); }});
    cases.push_back({"matmul", {P("a", {1, 1, 2, 3}), P("b", {1, 1, 3, 4})}, [](auto& v) { return ad::matmul(v[0], v[1]); }});
    cases.push_back({"householder", {P("v", {1, 1, 3, 4})}, [](auto& v) { return ad::householder(v[0]); }});
    cases.push_back({"logabsdet", {P("w", {1, 1, 3, 3})}, [](auto& v) { return ad::logabsdet(v[0]); }});
    cases.push_back({"logabs_select", {P("a", s)}, [](auto& v) { return ad::logabs_select(v[0], {0, 3, 5}); }});
    cases.push_back({"periodic_logdet", {P("f", {2, 2, 3, 3}, 0.3)},
                     [](auto& v) { return ad::periodic_logdet(v[0], {1, 1, 1, 1}, 4, 3); }});
    cases.push_back({"gaussian_logp", {P("z", s), P("m", s), P("l", s, 0.3)},
                     [](auto& v) { return ad::gaussian_logp(v[0], v[1], v[2]); }});
    cases.push_back({"std_normal_logp", {P("z", s)}, [](auto& v) { return ad::std_normal_logp(v[0]); }});
    for (auto& c : cases) {
      INFO(c.name);
      CHECK(op_error(c.build, c.in, rng) < 1e-5);
    }
  }
}

TEST_CASE("periodic_logdet gradient on an image smaller than the filter") {
  std::mt19937_64 rng(5);
  std::vector<Parameter> in{random_param("f", {2, 2, 3, 3}, rng, 0.4)};
  const Build b = [](auto& v) { return ad::periodic_logdet(v[0], {1, 1, 1, 1}, 1, 2); };
  CHECK(op_error(b, in, rng) < 1e-5);
}

TEST_CASE("a variable used twice accumulates both path gradients") {
  std::mt19937_64 rng(6);
  const Tensor4 xv = oracle::random_tensor({1, 2, 2, 2}, rng);
  Tape t;
  const Var x = t.leaf(xv);
  const GradientMap g = t.backward(ad::sum(ad::add(ad::mul(x, x), ad::scale(x, 3.0))));
  for (std::size_t i = 0; i < xv.size(); ++i) CHECK(std::abs(g[x][i] - (2.0 * xv[i] + 3.0)) < 1e-14);

  Parameter p = random_param("p", {1, 1, 1, 3}, rng);
  Tape t2;
  const Var a = t2.parameter(p), b = t2.parameter(p);
  CHECK(a.id == b.id);
  const Tensor4 gp = t2.backward(ad::sum(ad::add(a, b)))[p];
  CHECK(gp == Tensor4({1, 1, 1, 3}, 2.0));
}

TEST_CASE("backward errors") {
  SUBCASE("non-scalar loss") {
    Tape t;
    const Var x = t.leaf(Tensor4({1, 1, 1, 2}, 1.0));
    CHECK_THROWS_WITH_AS(t.backward(ad::exp(x)), doctest::Contains("scalar"), std::invalid_argument);
  }
  SUBCASE("detached graph") {
    Tape t;
    const Var c = t.constant(Tensor4::scalar(2.0));
    CHECK_THROWS_WITH_AS(t.backward(ad::exp(c)), doctest::Contains("detached"), std::invalid_argument);
  }
  SUBCASE("second backward") {
    Tape t;
    const Var x = t.leaf(Tensor4::scalar(2.0));
    const Var y = ad::exp(x);
    t.backward(y);
    CHECK_THROWS_AS(t.backward(y), std::logic_error);
  }
  SUBCASE("loss from another tape") {
    Tape a, b;
    const Var x = a.leaf(Tensor4::scalar(1.0));
    CHECK_THROWS_AS(b.backward(x), std::invalid_argument);
  }
  SUBCASE("non-recording tape") {
    Tape t(false);
    Parameter p = make_vector_parameter("p", 1, 1.0);
    const Var x = t.parameter(p);
    CHECK_FALSE(t.requires_grad(x));
    CHECK_THROWS_AS(t.backward(ad::exp(x)), std::invalid_argument);
  }
  SUBCASE("frozen parameters get no gradient") {
    Parameter frozen = make_vector_parameter("frozen", 1, 1.0);
    frozen.trainable = false;
    Parameter live = make_vector_parameter("live", 1, 1.0);
    Tape t;
    const GradientMap g = t.backward(ad::sum(ad::mul(t.parameter(frozen), t.parameter(live))));
    CHECK_FALSE(g.contains(frozen));
    CHECK(g[live][0] == 1.0);
  }
}

TEST_CASE("record dispatch") {
  Tape t;
  const Var x = t.leaf(Tensor4({1, 1, 1, 2}, 1.0));
  const Var y = t.record(OpKind::Add, std::vector<Var>{x, x});
  CHECK(y.value() == Tensor4({1, 1, 1, 2}, 2.0));
  CHECK_THROWS_WITH_AS(t.record(OpKind::Leaf, std::vector<Var>{x}), doctest::Contains("unsupported"),
                       std::invalid_argument);
  CHECK_THROWS_AS(t.record(OpKind::Mul, std::vector<Var>{x}), std::invalid_argument);
  CHECK_THROWS_AS(ad::add(x, t.leaf(Tensor4({1, 1, 2, 1}))), std::invalid_argument);
}

TEST_CASE("grad_check on a linear function is exact") {
  std::mt19937_64 rng(7);
  Parameter p = random_param("p", {1, 2, 3, 1}, rng);
  const Tensor4 c = oracle::random_tensor(p.value.shape(), rng);
  Parameter* ps[] = {&p};
  const auto r = grad_check([&](Tape& t) { return ad::sum(ad::mul(t.parameter(p), t.constant(c))); }, ps);
  CHECK(r.max_rel_error < 1e-10);
  CHECK(r.coordinates == 6);
}

TEST_CASE("grad_check names the worst coordinate of a wrong gradient") {
  // relu has a kink at zero; the central difference straddles it.
  Parameter p = make_vector_parameter("p", 2, 0.0);
  p.value[1] = 1.0;
  Parameter* ps[] = {&p};
  const auto r = grad_check([&](Tape& t) { return ad::sum(ad::relu(t.parameter(p))); }, ps);
  CHECK(r.max_rel_error > 0.4);
  CHECK(r.worst == "p[0]");
}

TEST_CASE("periodic_conv equals wrap-around conv2d") {
  std::mt19937_64 rng(8);
  const Tensor4 x = oracle::random_tensor({2, 3, 5, 4}, rng);
  const Tensor4 f = oracle::random_tensor({3, 3, 3, 3}, rng);
  Tape t(false);
  const Var y = ad::periodic_conv(t.constant(x), t.constant(f), {1, 1, 1, 1});
  CHECK(max_abs_diff(y.value(), conv2d(x, Filter::centered(f), Boundary::Wrap)) < 1e-12);
}

TEST_CASE("squeeze ordering is TL, TR, BL, BR") {
  Tape t(false);
  const Var x = t.constant(Tensor4({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  const Var y = ad::squeeze2x2(x);
  CHECK(y.shape() == Shape4{1, 4, 1, 1});
  for (std::size_t k = 0; k < 4; ++k) CHECK(y.value()[k] == double(k + 1));
  CHECK(ad::unsqueeze2x2(y).value() == x.value());
}

TEST_CASE("gaussian_logp with unit scale matches the standard normal") {
  std::mt19937_64 rng(9);
  const Tensor4 z = oracle::random_tensor({3, 2, 2, 2}, rng);
  Tape t(false);
  const Var zero = t.constant(Tensor4(z.shape()));
  const Var a = ad::gaussian_logp(t.constant(z), zero, zero);
  const Var b = ad::std_normal_logp(t.constant(z));
  CHECK(max_abs_diff(a.value(), b.value()) < 1e-14);
  double direct = 0.0;
  for (std::size_t i = 0; i < 8; ++i) direct += -0.5 * z[i] * z[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(std::abs(b.value()[0] - direct) < 1e-12);
}
