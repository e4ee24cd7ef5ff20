#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "flowforge/convkit.hpp"
#include "oracles.hpp"

using namespace flowforge;

namespace {

Filter random_masked(MaskVariant v, std::size_t p, std::size_t c, std::mt19937_64& rng) {
  Filter mask = build_autoregressive_mask(v, p, c);
  std::normal_distribution<double> nd(0.0, 0.5);
  const auto [cy, cx] = mask.center();
  for (std::size_t i = 0; i < mask.taps().size(); ++i) mask.taps()[i] *= nd(rng);
  for (std::size_t ch = 0; ch < c; ++ch) mask(ch, ch, cy, cx) = (ch % 2 ? -1.0 : 1.0) * (1.0 + std::abs(nd(rng)));
  return mask;
}

// Copies x into a zero frame with `m` extra pixels on every side.
Tensor4 embed(const Tensor4& x, std::size_t m) {
  Tensor4 out({x.n(), x.c(), x.h() + 2 * m, x.w() + 2 * m});
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c)
      for (std::size_t j = 0; j < x.h(); ++j)
        for (std::size_t i = 0; i < x.w(); ++i) out(n, c, j + m, i + m) = x(n, c, j, i);
  return out;
}

bool lower_triangular(const RMatrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = r + 1; c < m.cols(); ++c)
      if (m(r, c) != 0.0) return false;
  return true;
}

bool upper_triangular(const RMatrix& m) { return lower_triangular(m.transpose()); }

}  // namespace

TEST_CASE("Filter rejects padding that changes the spatial size") {
  CHECK_THROWS_AS(Filter(Tensor4({1, 1, 3, 3}), {1, 0, 1, 1}), std::invalid_argument);
  CHECK_NOTHROW(Filter(Tensor4({1, 1, 2, 2}), {1, 0, 1, 0}));
}

TEST_CASE("conv2d identity and channel mismatch") {
  std::mt19937_64 rng(1);
  const Tensor4 x = oracle::random_tensor({2, 3, 4, 5}, rng);
  CHECK(conv2d(x, Filter::delta(3), Boundary::Zero) == x);
  CHECK(conv2d(x, Filter::delta(3, 3), Boundary::Wrap) == x);
  CHECK_THROWS_AS(conv2d(x, Filter::delta(2), Boundary::Zero), std::invalid_argument);
}

TEST_CASE("conv2d single-channel 3x3 example with one-pixel zero padding") {
  // taps a..i row-major, input values 0..8 row-major
  Tensor4 taps({1, 1, 3, 3});
  for (std::size_t k = 0; k < 9; ++k) taps[k] = 1.0 + static_cast<double>(k);  // a=1 ... i=9
  const Filter f = Filter::centered(taps);
  Tensor4 x({1, 1, 3, 3});
  for (std::size_t k = 0; k < 9; ++k) x[k] = static_cast<double>(k);
  const Tensor4 z = conv2d(x, f, Boundary::Zero);
  const double e = 5, ff = 6, h = 8, i = 9;
  CHECK(z(0, 0, 0, 0) == e * 0 + ff * 1 + h * 3 + i * 4);

  const RMatrix m = dense_operator(f, 3, 3, Boundary::Zero).matrix;
  const std::vector<double> row0{e, ff, 0, h, i, 0, 0, 0, 0};
  for (std::size_t c = 0; c < 9; ++c) CHECK(m(0, c) == row0[c]);
}

TEST_CASE("conv2d matches the defining sum and the dense operator") {
  std::mt19937_64 rng(2);
  for (auto b : {Boundary::Zero, Boundary::Wrap}) {
    for (int trial = 0; trial < 12; ++trial) {
      const std::size_t c = 1 + trial % 3, h = 1 + trial % 5, w = 2 + trial % 4, k = trial % 2 ? 3 : 1;
      const Filter f = Filter::centered(oracle::random_tensor({c + 1, c, k, k}, rng));
      const Tensor4 x = oracle::random_tensor({2, c, h, w}, rng);
      const Tensor4 z = conv2d(x, f, b);
      CHECK(max_abs_diff(z, oracle::brute_conv2d(x, f, b)) < 1e-12);
      const RMatrix m = dense_operator(f, h, w, b).matrix;
      const auto mx = m * std::span<const double>(vectorize(x, 1));
      const auto zv = vectorize(z, 1);
      for (std::size_t t = 0; t < zv.size(); ++t) CHECK(std::abs(mx[t] - zv[t]) < 1e-12);
    }
  }
}

TEST_CASE("conv2d is linear") {
  std::mt19937_64 rng(3);
  const Filter f = Filter::centered(oracle::random_tensor({2, 2, 3, 3}, rng));
  const Tensor4 x = oracle::random_tensor({1, 2, 4, 4}, rng), y = oracle::random_tensor({1, 2, 4, 4}, rng);
  const double alpha = 0.7, beta = -1.3;
  Tensor4 mix(x.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * x[i] + beta * y[i];
  const Tensor4 zx = conv2d(x, f, Boundary::Zero), zy = conv2d(y, f, Boundary::Zero);
  const Tensor4 zm = conv2d(mix, f, Boundary::Zero);
  for (std::size_t i = 0; i < zm.size(); ++i) CHECK(std::abs(zm[i] - alpha * zx[i] - beta * zy[i]) < 1e-12);
}

TEST_CASE("conv2d adjoints satisfy <Ax, g> == <x, Aᵀg>") {
  std::mt19937_64 rng(4);
  for (auto b : {Boundary::Zero, Boundary::Wrap}) {
    const Filter f(oracle::random_tensor({3, 2, 2, 2}, rng), {1, 0, 0, 1});
    const Tensor4 x = oracle::random_tensor({2, 2, 3, 4}, rng), g = oracle::random_tensor({2, 3, 3, 4}, rng);
    const Tensor4 z = conv2d(x, f, b);
    const Tensor4 gx = conv2d_backward_input(g, f, b);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) lhs += z[i] * g[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gx[i];
    CHECK(std::abs(lhs - rhs) < 1e-10);

    // filter gradient: d<conv(x, f), g>/df is linear in f, so a directional
    // derivative is exact.
    const Tensor4 gf = conv2d_backward_filter(x, g, f, b);
    Filter dir(oracle::random_tensor(f.taps().shape(), rng), f.pad());
    double dot = 0.0, directional = 0.0;
    for (std::size_t i = 0; i < gf.size(); ++i) dot += gf[i] * dir.taps()[i];
    const Tensor4 zd = conv2d(x, dir, b);
    for (std::size_t i = 0; i < zd.size(); ++i) directional += zd[i] * g[i];
    CHECK(std::abs(dot - directional) < 1e-10);
  }
}

TEST_CASE("build_autoregressive_mask") {
  SUBCASE("p=1 reduces to a lower-triangular channel matrix") {
    const Filter m = build_autoregressive_mask(MaskVariant::Lower, 1, 2);
    CHECK(m(0, 0, 0, 0) == 1.0);
    CHECK(m(0, 1, 0, 0) == 0.0);
    CHECK(m(1, 0, 0, 0) == 1.0);
    CHECK(m(1, 1, 0, 0) == 1.0);
  }
  SUBCASE("p=2, c=1 lower keeps all taps with top-left padding") {
    const Filter m = build_autoregressive_mask(MaskVariant::Lower, 2, 1);
    for (double v : m.taps().data()) CHECK(v == 1.0);
    CHECK(m.pad() == Padding{1, 0, 1, 0});
    CHECK(lower_triangular(dense_operator(m, 3, 3, Boundary::Zero).matrix));
  }
  SUBCASE("p=2, c=2 upper has 15 ones and an upper-triangular operator") {
    const Filter m = build_autoregressive_mask(MaskVariant::Upper, 2, 2);
    double ones = 0.0;
    for (double v : m.taps().data()) ones += v;
    CHECK(ones == 15.0);
    const RMatrix d = dense_operator(m, 3, 3, Boundary::Zero).matrix;
    CHECK(d.rows() == 18);
    CHECK(upper_triangular(d));
  }
}

TEST_CASE("masked operators are exactly triangular with center taps on the diagonal") {
  std::mt19937_64 rng(5);
  for (auto v : {MaskVariant::Lower, MaskVariant::Upper})
    for (std::size_t p = 1; p <= 3; ++p)
      for (std::size_t c = 1; c <= 3; ++c) {
        const Filter f = random_masked(v, p, c, rng);
        const RMatrix d = dense_operator(f, 3, 3, Boundary::Zero).matrix;
        CHECK((v == MaskVariant::Lower ? lower_triangular(d) : upper_triangular(d)));
        const auto [cy, cx] = f.center();
        for (std::size_t t = 0; t < d.rows(); ++t) CHECK(d(t, t) == f(t % c, t % c, cy, cx));

        double expected = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) expected += std::log(std::abs(f(ch, ch, cy, cx)));
        CHECK(std::abs(lu_slogdet(d).logabsdet - 9.0 * expected) < 1e-9);
      }
}

TEST_CASE("combine_filters") {
  std::mt19937_64 rng(6);
  SUBCASE("1x1 filters compose as matrix products") {
    const Filter a(oracle::random_tensor({3, 2, 1, 1}, rng), {});
    const Filter b(oracle::random_tensor({2, 3, 1, 1}, rng), {});
    const Filter k = combine_filters(b, a);
    RMatrix am(3, 2, std::vector<double>(a.taps().data().begin(), a.taps().data().end()));
    RMatrix bm(2, 3, std::vector<double>(b.taps().data().begin(), b.taps().data().end()));
    const RMatrix ba = bm * am;
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(k.taps()[i] - ba.data()[i]) < 1e-15);
  }
  SUBCASE("delta composed with delta") {
    const Filter k = combine_filters(Filter::delta(2, 3), Filter::delta(2, 3));
    CHECK(k.kh() == 5);
    CHECK(k.taps() == Filter::delta(2, 5).taps());
    CHECK(k.pad() == Padding{2, 2, 2, 2});
  }
  SUBCASE("two off-center 2x2 filters give a centered 3x3 filter") {
    const Filter k = combine_filters(random_masked(MaskVariant::Upper, 2, 2, rng),
                                     random_masked(MaskVariant::Lower, 2, 2, rng));
    CHECK(k.kh() == 3);
    CHECK(k.pad() == Padding{1, 1, 1, 1});
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(combine_filters(Filter::delta(2), Filter::delta(3)), std::invalid_argument);
  }
}

TEST_CASE("chained convolutions equal the combined filter on zero-extended signals") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Filter k1 = random_masked(MaskVariant::Lower, 2, 2, rng);
    const Filter k2 = random_masked(MaskVariant::Upper, 2, 2, rng);
    const Filter k = combine_filters(k2, k1);
    const Tensor4 x = embed(oracle::random_tensor({1, 2, 5, 5}, rng), 1);
    const Tensor4 chained = conv2d(conv2d(x, k1, Boundary::Zero), k2, Boundary::Zero);
    CHECK(max_abs_diff(chained, conv2d(x, k, Boundary::Zero)) < 1e-12);
  }
}

TEST_CASE("size-preserving chained convolution differs from the combined filter only at the far border") {
  std::mt19937_64 rng(8);
  const Filter k1 = random_masked(MaskVariant::Lower, 2, 2, rng);
  const Filter k2 = random_masked(MaskVariant::Upper, 2, 2, rng);
  const Tensor4 x = oracle::random_tensor({1, 2, 5, 5}, rng);
  const Tensor4 chained = conv2d(conv2d(x, k1, Boundary::Zero), k2, Boundary::Zero);
  const Tensor4 merged = conv2d(x, combine_filters(k2, k1), Boundary::Zero);
  double interior = 0.0, border = 0.0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t i = 0; i < 5; ++i) {
        const double d = std::abs(chained(0, c, j, i) - merged(0, c, j, i));
        (j < 4 && i < 4 ? interior : border) = std::max(j < 4 && i < 4 ? interior : border, d);
      }
  CHECK(interior < 1e-12);
  CHECK(border > 1e-6);
}

TEST_CASE("combine_filters is associative") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Filter k1(oracle::random_tensor({2, 3, 2, 2}, rng), {1, 0, 0, 1});
    const Filter k2 = Filter::centered(oracle::random_tensor({2, 2, 3, 3}, rng));
    const Filter k3(oracle::random_tensor({1, 2, 2, 1}, rng), {0, 1, 0, 0});
    const Filter a = combine_filters(k3, combine_filters(k2, k1));
    const Filter b = combine_filters(combine_filters(k3, k2), k1);
    CHECK(a.pad() == b.pad());
    CHECK(max_abs_diff(a.taps(), b.taps()) < 1e-12);
  }
}

TEST_CASE("solve_autoregressive") {
  std::mt19937_64 rng(10);
  SUBCASE("delta filter is the identity") {
    const Tensor4 z = oracle::random_tensor({2, 3, 4, 4}, rng);
    CHECK(solve_autoregressive(z, Filter::delta(3), MaskVariant::Lower) == z);
  }
  SUBCASE("round trip and dense inverse for LOWER 2x2, c=2, 4x4") {
    const Filter f = random_masked(MaskVariant::Lower, 2, 2, rng);
    const Tensor4 x = oracle::random_tensor({3, 2, 4, 4}, rng);
    const Tensor4 z = conv2d(x, f, Boundary::Zero);
    const Tensor4 solved = solve_autoregressive(z, f, MaskVariant::Lower);
    CHECK(max_abs_diff(solved, x) < 1e-9);

    const RMatrix dense = dense_operator(f, 4, 4, Boundary::Zero).matrix;
    const auto ref = solve(dense, std::span<const double>(vectorize(z, 1)));
    const auto got = vectorize(solved, 1);
    for (std::size_t t = 0; t < ref.size(); ++t) CHECK(std::abs(ref[t] - got[t]) < 1e-8);
  }
  SUBCASE("matches the dense inverse on every small instance") {
    double worst = 0.0;
    for (auto v : {MaskVariant::Lower, MaskVariant::Upper})
      for (std::size_t c = 1; c <= 3; ++c)
        for (std::size_t h = 1; h <= 5; ++h)
          for (std::size_t w = 1; w <= 5; w += 2)
            for (std::size_t p = 1; p <= 3; ++p) {
              const Filter f = random_masked(v, p, c, rng);
              const Tensor4 z = oracle::random_tensor({1, c, h, w}, rng);
              const auto ref = solve(dense_operator(f, h, w, Boundary::Zero).matrix,
                                     std::span<const double>(vectorize(z)));
              const auto got = vectorize(solve_autoregressive(z, f, v));
              for (std::size_t t = 0; t < ref.size(); ++t) worst = std::max(worst, std::abs(ref[t] - got[t]));
            }
    CHECK(worst < 1e-8);
  }
  SUBCASE("sequential, batched and threaded sweeps agree") {
    const Filter f = random_masked(MaskVariant::Upper, 3, 3, rng);
    const Tensor4 z = oracle::random_tensor({7, 3, 5, 6}, rng);
    const Tensor4 seq = solve_autoregressive(z, f, MaskVariant::Upper, SubstitutionMode::Sequential);
    const Tensor4 bat = solve_autoregressive(z, f, MaskVariant::Upper, SubstitutionMode::BatchParallel, 1);
    const Tensor4 thr = solve_autoregressive(z, f, MaskVariant::Upper, SubstitutionMode::BatchParallel, 3);
    CHECK(max_abs_diff(seq, bat) < 1e-12);
    CHECK(bat == thr);
    CHECK(max_abs_diff(conv2d(seq, f, Boundary::Zero), z) < 1e-9);
  }
  SUBCASE("zero diagonal tap names the channel") {
    Filter f = random_masked(MaskVariant::Lower, 2, 3, rng);
    const auto [cy, cx] = f.center();
    f(1, 1, cy, cx) = 0.0;
    try {
      solve_autoregressive(Tensor4({1, 3, 2, 2}), f, MaskVariant::Lower);
      FAIL("expected NonInvertibleError");
    } catch (const NonInvertibleError& e) {
      CHECK(e.channel() == 1);
      CHECK(std::string(e.what()).find("channel 1") != std::string::npos);
    }
  }
  SUBCASE("unmasked filters are rejected") {
    const Filter f = Filter::centered(oracle::random_tensor({2, 2, 3, 3}, rng));
    CHECK_THROWS_AS(solve_autoregressive(Tensor4({1, 2, 3, 3}), f, MaskVariant::Lower), std::invalid_argument);
  }
}

TEST_CASE("dense_operator of a 1x1 filter is block diagonal") {
  std::mt19937_64 rng(11);
  const Filter f(oracle::random_tensor({2, 2, 1, 1}, rng), {});
  const RMatrix m = dense_operator(f, 2, 3, Boundary::Zero).matrix;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const bool same_pixel = r / 2 == c / 2;
      CHECK(m(r, c) == (same_pixel ? f(r % 2, c % 2, 0, 0) : 0.0));
    }
}
