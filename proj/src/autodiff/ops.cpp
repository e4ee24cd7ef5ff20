#include <cmath>
#include <numbers>

#include "flowforge/autodiff.hpp"
#include "flowforge/gemm.hpp"
#include "flowforge/numerics.hpp"
#include "flowforge/spectral.hpp"

namespace flowforge {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ½·log(2π)

[[noreturn]] void fail(OpKind k, const std::string& msg) {
  throw std::invalid_argument(std::string(to_string(k)) + ": " + msg);
}

void expect_same(OpKind k, const Tensor4& a, const Tensor4& b) {
  if (a.shape() != b.shape()) fail(k, "shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

bool is_vector(const Tensor4& t, std::size_t k) { return t.size() == k; }

RMatrix as_matrix(const Tensor4& t) {
  return RMatrix(t.h(), t.w(), std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor4 from_matrix(const RMatrix& m) {
  return Tensor4({1, 1, m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

Filter filter_of(const Tensor4& taps, const OpAttrs& attrs) {
  return attrs.has_pad ? Filter(taps, attrs.pad) : Filter::centered(taps);
}

struct Ctx {
  Tape& tape;
  OpKind kind;
  std::span<const Var> in;
  const OpAttrs& attrs;

  const Tensor4& v(std::size_t i) const { return tape.value(in[i]); }
  const Tensor4* p(std::size_t i) const { return &tape.value(in[i]); }
  std::vector<std::size_t> ids() const {
    std::vector<std::size_t> out;
    for (const Var& x : in) out.push_back(x.id);
    return out;
  }
  // The node about to be appended; backward rules use it to read their output.
  Var next() const { return {&tape, tape.size()}; }
  Var push(Tensor4 value, BackwardFn fn) const { return tape.push(kind, std::move(value), ids(), std::move(fn)); }
};

template <class F>
Var unary(const Ctx& c, F f, double (*df)(double x, double y)) {
  const Tensor4& a = c.v(0);
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  const Tensor4* x = c.p(0);
  const Var self = c.next();
  return c.push(std::move(out), [x, self, df](const Tensor4& g, std::span<Tensor4* const> gi) {
    const Tensor4& y = self.value();
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * df((*x)[i], y[i]);
  });
}

Var op_binary(const Ctx& c) {
  const Tensor4 &a = c.v(0), &b = c.v(1);
  expect_same(c.kind, a, b);
  Tensor4 out(a.shape());
  const OpKind k = c.kind;
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = k == OpKind::Add ? a[i] + b[i] : k == OpKind::Sub ? a[i] - b[i] : a[i] * b[i];
  const Tensor4 *pa = c.p(0), *pb = c.p(1);
  return c.push(std::move(out), [k, pa, pb](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (gi[0]) (*gi[0])[i] += k == OpKind::Mul ? g[i] * (*pb)[i] : g[i];
      if (gi[1]) (*gi[1])[i] += k == OpKind::Mul ? g[i] * (*pa)[i] : k == OpKind::Sub ? -g[i] : g[i];
    }
  });
}

Var op_affine_scalar(const Ctx& c) {
  const Tensor4& a = c.v(0);
  const double s = c.attrs.scalar;
  const bool shift = c.kind == OpKind::AddScalar;
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = shift ? a[i] + s : a[i] * s;
  return c.push(std::move(out), [s, shift](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += shift ? g[i] : g[i] * s;
  });
}

Var op_sum(const Ctx& c) {
  const Tensor4& a = c.v(0);
  const bool per_example = c.kind == OpKind::SumPerExample;
  const std::size_t groups = per_example ? a.n() : 1, len = a.size() / std::max<std::size_t>(groups, 1);
  Tensor4 out({per_example ? a.n() : 1, 1, 1, 1});
  for (std::size_t n = 0; n < groups; ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[n * len + i];
    out[n] = acc;
  }
  return c.push(std::move(out), [len](const Tensor4& g, std::span<Tensor4* const> gi) {
    Tensor4& dst = *gi[0];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i / len];
  });
}

Var op_expand_batch(const Ctx& c) {
  if (c.v(0).size() != 1) fail(c.kind, "input must be a scalar");
  const std::size_t n = c.attrs.count;
  return c.push(Tensor4({n, 1, 1, 1}, c.v(0)[0]), [](const Tensor4& g, std::span<Tensor4* const> gi) {
    double acc = 0.0;
    for (double v : g.data()) acc += v;
    (*gi[0])[0] += acc;
  });
}

Var op_slice(const Ctx& c) {
  const Tensor4& x = c.v(0);
  const std::size_t b = c.attrs.begin, k = c.attrs.count;
  if (b + k > x.c() || k == 0) fail(c.kind, "channel range out of bounds");
  const std::size_t hw = x.h() * x.w();
  Tensor4 out({x.n(), k, x.h(), x.w()});
  for (std::size_t n = 0; n < x.n(); ++n)
    std::copy_n(x.example(n).begin() + b * hw, k * hw, out.example(n).begin());
  return c.push(std::move(out), [b, k, hw](const Tensor4& g, std::span<Tensor4* const> gi) {
    Tensor4& dst = *gi[0];
    for (std::size_t n = 0; n < g.n(); ++n)
      for (std::size_t i = 0; i < k * hw; ++i) dst.example(n)[b * hw + i] += g.example(n)[i];
  });
}

Var op_concat(const Ctx& c) {
  const Tensor4 &a = c.v(0), &b = c.v(1);
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) fail(c.kind, "batch/spatial mismatch");
  const std::size_t ea = a.shape().example(), eb = b.shape().example();
  Tensor4 out({a.n(), a.c() + b.c(), a.h(), a.w()});
  for (std::size_t n = 0; n < a.n(); ++n) {
    std::copy_n(a.example(n).begin(), ea, out.example(n).begin());
    std::copy_n(b.example(n).begin(), eb, out.example(n).begin() + ea);
  }
  return c.push(std::move(out), [ea, eb](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t n = 0; n < g.n(); ++n) {
      if (gi[0])
        for (std::size_t i = 0; i < ea; ++i) gi[0]->example(n)[i] += g.example(n)[i];
      if (gi[1])
        for (std::size_t i = 0; i < eb; ++i) gi[1]->example(n)[i] += g.example(n)[ea + i];
    }
  });
}

// Index map between (n, c, y, x) of the unsqueezed tensor and its squeezed
// counterpart; visit(src_index, dst_index) for every entry.
template <class F>
void squeeze_map(Shape4 big, F visit) {
  const std::size_t h2 = big.h / 2, w2 = big.w / 2;
  for (std::size_t n = 0; n < big.n; ++n)
    for (std::size_t ch = 0; ch < big.c; ++ch)
      for (std::size_t y = 0; y < big.h; ++y)
        for (std::size_t x = 0; x < big.w; ++x) {
          const std::size_t k = 2 * (y % 2) + (x % 2);
          const std::size_t src = ((n * big.c + ch) * big.h + y) * big.w + x;
          const std::size_t dst = ((n * 4 * big.c + 4 * ch + k) * h2 + y / 2) * w2 + x / 2;
          visit(src, dst);
        }
}

Var op_squeeze(const Ctx& c) {
  const Tensor4& x = c.v(0);
  const bool fwd = c.kind == OpKind::Squeeze;
  Shape4 big = x.shape();
  if (fwd) {
    if (big.h % 2 || big.w % 2) fail(c.kind, "spatial extents must be even, got " + to_string(big));
  } else {
    if (big.c % 4) fail(c.kind, "channel count must be a multiple of 4");
    big = {big.n, big.c / 4, big.h * 2, big.w * 2};
  }
  const Shape4 small{big.n, big.c * 4, big.h / 2, big.w / 2};
  Tensor4 out(fwd ? small : big);
  squeeze_map(big, [&](std::size_t s, std::size_t d) { fwd ? out[d] = x[s] : out[s] = x[d]; });
  return c.push(std::move(out), [fwd, big](const Tensor4& g, std::span<Tensor4* const> gi) {
    Tensor4& dst = *gi[0];
    squeeze_map(big, [&](std::size_t s, std::size_t d) { fwd ? dst[s] += g[d] : dst[d] += g[s]; });
  });
}

Var op_reshape(const Ctx& c) {
  const Tensor4& x = c.v(0);
  if (c.attrs.shape.size() != x.size()) fail(c.kind, "cannot reshape " + to_string(x.shape()));
  return c.push(x.reshaped(c.attrs.shape), [](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

Var op_conv(const Ctx& c) {
  const Tensor4* x = c.p(0);
  const Filter f = filter_of(c.v(1), c.attrs);
  const Boundary b = c.kind == OpKind::DftLinearMap ? Boundary::Wrap : c.attrs.boundary;
  Tensor4 out = c.kind == OpKind::DftLinearMap ? spectral_apply(*x, filter_spectrum(f, x->h(), x->w()))
                                               : conv2d(*x, f, b);
  return c.push(std::move(out), [x, f, b](const Tensor4& g, std::span<Tensor4* const> gi) {
    if (gi[0]) *gi[0] += conv2d_backward_input(g, f, b);
    if (gi[1]) *gi[1] += conv2d_backward_filter(*x, g, f, b);
  });
}

Var op_pixel_matmul(const Ctx& c) {
  const Tensor4* x = c.p(0);
  const Tensor4& w = c.v(1);
  if (w.n() != 1 || w.c() != 1 || w.w() != x->c()) fail(c.kind, "matrix " + to_string(w.shape()) + " vs input " + to_string(x->shape()));
  const Filter f(w.reshaped({w.h(), w.w(), 1, 1}), {});
  const Shape4 ws = w.shape();
  return c.push(conv2d(*x, f, Boundary::Zero), [x, f, ws](const Tensor4& g, std::span<Tensor4* const> gi) {
    if (gi[0]) *gi[0] += conv2d_backward_input(g, f, Boundary::Zero);
    if (gi[1]) *gi[1] += conv2d_backward_filter(*x, g, f, Boundary::Zero).reshaped(ws);
  });
}

Var op_channel(const Ctx& c) {
  const bool with_scale = c.kind == OpKind::AffineChannel;
  const Tensor4* x = c.p(0);
  const Tensor4* s = with_scale ? c.p(1) : nullptr;
  const Tensor4* b = c.p(with_scale ? 2 : 1);
  const std::size_t ch = x->c(), hw = x->h() * x->w();
  if ((s && !is_vector(*s, ch)) || !is_vector(*b, ch)) fail(c.kind, "per-channel vectors must have length " + std::to_string(ch));
  Tensor4 out(x->shape());
  for (std::size_t n = 0; n < x->n(); ++n)
    for (std::size_t k = 0; k < ch; ++k) {
      const double sc = s ? (*s)[k] : 1.0, bi = (*b)[k];
      const std::size_t off = (n * ch + k) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[off + i] = (*x)[off + i] * sc + bi;
    }
  return c.push(std::move(out), [x, s, ch, hw](const Tensor4& g, std::span<Tensor4* const> gi) {
    Tensor4* gx = gi[0];
    Tensor4* gs = s ? gi[1] : nullptr;
    Tensor4* gb = gi[s ? 2 : 1];
    for (std::size_t n = 0; n < g.n(); ++n)
      for (std::size_t k = 0; k < ch; ++k) {
        const std::size_t off = (n * ch + k) * hw;
        double ds = 0.0, db = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          if (gx) (*gx)[off + i] += g[off + i] * (s ? (*s)[k] : 1.0);
          ds += g[off + i] * (*x)[off + i];
          db += g[off + i];
        }
        if (gs) (*gs)[k] += ds;
        if (gb) (*gb)[k] += db;
      }
  });
}

Var op_matmul(const Ctx& c) {
  const Tensor4 *a = c.p(0), *b = c.p(1);
  if (a->n() != 1 || a->c() != 1 || b->n() != 1 || b->c() != 1 || a->w() != b->h()) {
    fail(c.kind, "cannot multiply " + to_string(a->shape()) + " by " + to_string(b->shape()));
  }
  const std::size_t m = a->h(), k = a->w(), n = b->w();
  Tensor4 out({1, 1, m, n});
  gemm::nn(m, n, k, a->data().data(), b->data().data(), out.data().data());
  return c.push(std::move(out), [a, b, m, k, n](const Tensor4& g, std::span<Tensor4* const> gi) {
    if (gi[0]) gemm::nt(m, k, n, g.data().data(), b->data().data(), gi[0]->data().data());
    if (gi[1]) gemm::tn(k, n, m, a->data().data(), g.data().data(), gi[1]->data().data());
  });
}

Var op_diag(const Ctx& c) {
  const Tensor4& v = c.v(0);
  const std::size_t k = v.size();
  Tensor4 out({1, 1, k, k});
  for (std::size_t i = 0; i < k; ++i) out[i * k + i] = v[i];
  return c.push(std::move(out), [k](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t i = 0; i < k; ++i) (*gi[0])[i] += g[i * k + i];
  });
}

RMatrix reflection(std::span<const double> v) {
  const std::size_t n = v.size();
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  RMatrix q = RMatrix::identity(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) q(r, c) -= 2.0 * v[r] * v[c] / norm2;
  return q;
}

Var op_householder(const Ctx& c) {
  const Tensor4* vs = c.p(0);
  const std::size_t k = vs->h(), n = vs->w();
  std::vector<std::vector<double>> rows(k);
  for (std::size_t i = 0; i < k; ++i) rows[i].assign(vs->data().begin() + i * n, vs->data().begin() + (i + 1) * n);
  const RMatrix q = householder_orthogonal(n, rows);
  return c.push(from_matrix(q), [vs, k, n](const Tensor4& g, std::span<Tensor4* const> gi) {
    std::vector<RMatrix> refl, prefix(k + 1), suffix(k + 1);
    for (std::size_t i = 0; i < k; ++i) refl.push_back(reflection(vs->data().subspan(i * n, n)));
    prefix[0] = RMatrix::identity(n);
    for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] * refl[i];
    suffix[k] = RMatrix::identity(n);
    for (std::size_t i = k; i-- > 0;) suffix[i] = refl[i] * suffix[i + 1];
    const RMatrix gq = as_matrix(g);
    for (std::size_t i = 0; i < k; ++i) {
      // Q = P·Q_i·S, so dL/dQ_i = Pᵀ·G·Sᵀ.
      const RMatrix gi_mat = prefix[i].transpose() * gq * suffix[i + 1].transpose();
      const auto v = vs->data().subspan(i * n, n);
      double norm2 = 0.0;
      for (double x : v) norm2 += x * x;
      const auto gv = gi_mat * v;
      const auto gtv = gi_mat.transpose() * v;
      double vgv = 0.0;
      for (std::size_t r = 0; r < n; ++r) vgv += v[r] * gv[r];
      for (std::size_t r = 0; r < n; ++r)
        (*gi[0])[i * n + r] += -2.0 / norm2 * (gv[r] + gtv[r]) + 4.0 * vgv / (norm2 * norm2) * v[r];
    }
  });
}

Var op_logabsdet(const Ctx& c) {
  const Tensor4* w = c.p(0);
  if (w->n() != 1 || w->c() != 1 || w->h() != w->w()) fail(c.kind, "expects a square matrix, got " + to_string(w->shape()));
  const double l = lu_slogdet(as_matrix(*w)).logabsdet;
  return c.push(Tensor4::scalar(l), [w](const Tensor4& g, std::span<Tensor4* const> gi) {
    const RMatrix inv_t = inverse(as_matrix(*w)).transpose();
    for (std::size_t i = 0; i < inv_t.size(); ++i) (*gi[0])[i] += g[0] * inv_t.data()[i];
  });
}

Var op_logabs_select(const Ctx& c) {
  const Tensor4* a = c.p(0);
  std::vector<std::size_t> idx = c.attrs.indices;
  double total = 0.0;
  for (std::size_t i : idx) {
    if (i >= a->size()) fail(c.kind, "index " + std::to_string(i) + " out of range");
    total += std::log(std::abs((*a)[i]));
  }
  return c.push(Tensor4::scalar(total), [a, idx](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t i : idx) (*gi[0])[i] += g[0] / (*a)[i];
  });
}

Var op_periodic_logdet(const Ctx& c) {
  const Filter f = filter_of(c.v(0), c.attrs);
  const std::size_t h = c.attrs.shape.h, w = c.attrs.shape.w;
  const FilterSpectrum s = filter_spectrum(f, h, w);
  return c.push(Tensor4::scalar(spectral_logdet(s)), [f, s](const Tensor4& g, std::span<Tensor4* const> gi) {
    const Tensor4 d = spectral_logdet_grad(f, invert_spectrum(s));
    for (std::size_t i = 0; i < d.size(); ++i) (*gi[0])[i] += g[0] * d[i];
  });
}

Var op_gaussian(const Ctx& c) {
  const bool standard = c.kind == OpKind::StdNormalLogp;
  const Tensor4* z = c.p(0);
  const Tensor4* mu = standard ? nullptr : c.p(1);
  const Tensor4* ls = standard ? nullptr : c.p(2);
  if (!standard) {
    expect_same(c.kind, *z, *mu);
    expect_same(c.kind, *z, *ls);
  }
  const std::size_t per = z->shape().example();
  Tensor4 out({z->n(), 1, 1, 1});
  for (std::size_t n = 0; n < z->n(); ++n) {
    double acc = 0.0;
    for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
      const double s = standard ? 0.0 : (*ls)[i];
      const double e = ((*z)[i] - (standard ? 0.0 : (*mu)[i])) * std::exp(-s);
      acc += -0.5 * e * e - s - kHalfLog2Pi;
    }
    out[n] = acc;
  }
  return c.push(std::move(out), [z, mu, ls, per, standard](const Tensor4& g, std::span<Tensor4* const> gi) {
    for (std::size_t i = 0; i < z->size(); ++i) {
      const double gn = g[i / per];
      const double s = standard ? 0.0 : (*ls)[i];
      const double inv = std::exp(-s);
      const double e = ((*z)[i] - (standard ? 0.0 : (*mu)[i])) * inv;
      if (gi[0]) (*gi[0])[i] -= gn * e * inv;
      if (standard) continue;
      if (gi[1]) (*gi[1])[i] += gn * e * inv;
      if (gi[2]) (*gi[2])[i] += gn * (e * e - 1.0);
    }
  });
}

std::size_t arity(OpKind k) {
  switch (k) {
    case OpKind::Add: case OpKind::Sub: case OpKind::Mul: case OpKind::ConcatChannels:
    case OpKind::Conv2d: case OpKind::DftLinearMap: case OpKind::PixelMatmul:
    case OpKind::AddChannel: case OpKind::Matmul:
      return 2;
    case OpKind::AffineChannel: case OpKind::GaussianLogp:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

Var Tape::record(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  if (kind == OpKind::Constant || kind == OpKind::Leaf || kind == OpKind::Param) {
    throw std::invalid_argument(std::string("record: unsupported op kind '") + to_string(kind) +
                                "'; use constant(), leaf() or parameter()");
  }
  if (inputs.size() != arity(kind)) {
    throw std::invalid_argument(std::string("record: ") + to_string(kind) + " takes " + std::to_string(arity(kind)) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
  for (const Var& v : inputs) node(v);  // ownership check
  const Ctx c{*this, kind, inputs, attrs};
  switch (kind) {
    case OpKind::Add: case OpKind::Sub: case OpKind::Mul:
      return op_binary(c);
    case OpKind::AddScalar: case OpKind::Scale:
      return op_affine_scalar(c);
    case OpKind::Exp:
      return unary(c, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
    case OpKind::Log:
      return unary(c, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
    case OpKind::Sigmoid:
      return unary(c, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
    case OpKind::Relu:
      return unary(c, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
    case OpKind::Sum: case OpKind::SumPerExample:
      return op_sum(c);
    case OpKind::ExpandBatch:
      return op_expand_batch(c);
    case OpKind::SliceChannels:
      return op_slice(c);
    case OpKind::ConcatChannels:
      return op_concat(c);
    case OpKind::Squeeze: case OpKind::Unsqueeze:
      return op_squeeze(c);
    case OpKind::Reshape:
      return op_reshape(c);
    case OpKind::Conv2d: case OpKind::DftLinearMap:
      return op_conv(c);
    case OpKind::PixelMatmul:
      return op_pixel_matmul(c);
    case OpKind::AffineChannel: case OpKind::AddChannel:
      return op_channel(c);
    case OpKind::Matmul:
      return op_matmul(c);
    case OpKind::Diag:
      return op_diag(c);
    case OpKind::Householder:
      return op_householder(c);
    case OpKind::LogAbsDet:
      return op_logabsdet(c);
    case OpKind::LogAbsSelect:
      return op_logabs_select(c);
    case OpKind::PeriodicLogdet:
      return op_periodic_logdet(c);
    case OpKind::GaussianLogp: case OpKind::StdNormalLogp:
      return op_gaussian(c);
    default:
      break;
  }
  throw std::invalid_argument(std::string("record: unsupported op kind '") + to_string(kind) + "'");
}

namespace ad {
namespace {

Var rec(OpKind k, std::initializer_list<Var> in, const OpAttrs& attrs = {}) {
  const std::vector<Var> v(in);
  if (v.empty() || !v.front().tape) throw std::invalid_argument("op on an unbound variable");
  return v.front().tape->record(k, v, attrs);
}

OpAttrs scalar_attr(double s) {
  OpAttrs a;
  a.scalar = s;
  return a;
}

OpAttrs pad_attr(Padding pad, Boundary b = Boundary::Zero) {
  OpAttrs a;
  a.pad = pad;
  a.has_pad = true;
  a.boundary = b;
  return a;
}

}  // namespace

Var add(Var a, Var b) { return rec(OpKind::Add, {a, b}); }
Var sub(Var a, Var b) { return rec(OpKind::Sub, {a, b}); }
Var mul(Var a, Var b) { return rec(OpKind::Mul, {a, b}); }
Var add_scalar(Var a, double s) { return rec(OpKind::AddScalar, {a}, scalar_attr(s)); }
Var scale(Var a, double s) { return rec(OpKind::Scale, {a}, scalar_attr(s)); }
Var exp(Var a) { return rec(OpKind::Exp, {a}); }
Var log(Var a) { return rec(OpKind::Log, {a}); }
Var sigmoid(Var a) { return rec(OpKind::Sigmoid, {a}); }
Var relu(Var a) { return rec(OpKind::Relu, {a}); }
Var sum(Var a) { return rec(OpKind::Sum, {a}); }
Var sum_per_example(Var a) { return rec(OpKind::SumPerExample, {a}); }

Var expand_batch(Var s, std::size_t n) {
  OpAttrs a;
  a.count = n;
  return rec(OpKind::ExpandBatch, {s}, a);
}

Var slice_channels(Var x, std::size_t begin, std::size_t count) {
  OpAttrs a;
  a.begin = begin;
  a.count = count;
  return rec(OpKind::SliceChannels, {x}, a);
}

Var concat_channels(Var a, Var b) { return rec(OpKind::ConcatChannels, {a, b}); }
Var squeeze2x2(Var x) { return rec(OpKind::Squeeze, {x}); }
Var unsqueeze2x2(Var x) { return rec(OpKind::Unsqueeze, {x}); }

Var reshape(Var x, Shape4 shape) {
  OpAttrs a;
  a.shape = shape;
  return rec(OpKind::Reshape, {x}, a);
}

Var conv2d(Var x, Var f, Padding pad, Boundary boundary) { return rec(OpKind::Conv2d, {x, f}, pad_attr(pad, boundary)); }
Var periodic_conv(Var x, Var f, Padding pad) { return rec(OpKind::DftLinearMap, {x, f}, pad_attr(pad, Boundary::Wrap)); }
Var pixel_matmul(Var x, Var w) { return rec(OpKind::PixelMatmul, {x, w}); }
Var affine_channel(Var x, Var scale, Var bias) { return rec(OpKind::AffineChannel, {x, scale, bias}); }
Var add_channel(Var x, Var bias) { return rec(OpKind::AddChannel, {x, bias}); }
Var matmul(Var a, Var b) { return rec(OpKind::Matmul, {a, b}); }
Var diag(Var v) { return rec(OpKind::Diag, {v}); }
Var householder(Var vectors) { return rec(OpKind::Householder, {vectors}); }
Var logabsdet(Var w) { return rec(OpKind::LogAbsDet, {w}); }

Var logabs_select(Var a, std::vector<std::size_t> indices) {
  OpAttrs at;
  at.indices = std::move(indices);
  return rec(OpKind::LogAbsSelect, {a}, at);
}

Var periodic_logdet(Var f, Padding pad, std::size_t h, std::size_t w) {
  OpAttrs a = pad_attr(pad, Boundary::Wrap);
  a.shape = {1, 1, h, w};
  return rec(OpKind::PeriodicLogdet, {f}, a);
}

Var gaussian_logp(Var z, Var mean, Var log_scale) { return rec(OpKind::GaussianLogp, {z, mean, log_scale}); }
Var std_normal_logp(Var z) { return rec(OpKind::StdNormalLogp, {z}); }

}  // namespace ad
}  // namespace flowforge
