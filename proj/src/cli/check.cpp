#include <cmath>
#include <functional>
#include <iomanip>

#include "flowforge/cli.hpp"

namespace flowforge::cli {
namespace {

constexpr ConvType kConvTypes[] = {ConvType::W1x1, ConvType::PLU, ConvType::QR, ConvType::Emerging,
                                   ConvType::Periodic};

void randomize(const std::vector<Parameter*>& params, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  for (Parameter* p : params) {
    if (p->name.ends_with(".initialized")) {
      p->value[0] = 1.0;
    } else if (p->trainable) {
      for (double& v : p->value.data()) v += nd(rng);
    }
    p->bump();
  }
}

Tensor4 random_input(Shape4 s, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Tensor4 t(s);
  for (double& v : t.data()) v = nd(rng);
  return t;
}

using VecMap = std::function<std::vector<double>(const std::vector<double>&)>;

VecMap layer_map(Layer& layer, std::size_t c, std::size_t h, std::size_t w) {
  return [&layer, c, h, w](const std::vector<double>& v) {
    return vectorize(layer.apply(unvectorize(v, c, h, w), Direction::Forward).y);
  };
}

/// Jacobian of an affine map from its images of 0 and the standard basis.
RMatrix basis_jacobian(const VecMap& f, std::size_t d) {
  RMatrix j(d, d);
  std::vector<double> e(d, 0.0);
  const std::vector<double> origin = f(e);
  for (std::size_t k = 0; k < d; ++k) {
    e[k] = 1.0;
    const std::vector<double> col = f(e);
    e[k] = 0.0;
    for (std::size_t i = 0; i < d; ++i) j(i, k) = col[i] - origin[i];
  }
  return j;
}

RMatrix central_jacobian(const VecMap& f, const std::vector<double>& x, double step) {
  const std::size_t d = x.size();
  RMatrix j(d, d);
  std::vector<double> p = x;
  for (std::size_t k = 0; k < d; ++k) {
    p[k] = x[k] + step;
    const std::vector<double> plus = f(p);
    p[k] = x[k] - step;
    const std::vector<double> minus = f(p);
    p[k] = x[k];
    for (std::size_t i = 0; i < d; ++i) j(i, k) = (plus[i] - minus[i]) / (2.0 * step);
  }
  return j;
}

/// Tracks the worst error of a suite and converts exceptions into failures.
struct Suite {
  SuiteResult r;
  Suite(std::string name, double tol) {
    r.name = std::move(name);
    r.tolerance = tol;
  }
  void record(double err, const std::string& what) {
    ++r.cases;
    if (!(err <= r.max_abs_error)) r.max_abs_error = std::isnan(err) ? INFINITY : err;
    if (!(err <= r.tolerance) && r.pass) {
      r.pass = false;
      std::ostringstream s;
      s << what << ": error " << err;
      r.detail = s.str();
    }
  }
  template <class F>
  void guarded(const std::string& what, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      ++r.cases;
      if (r.pass) r.detail = what + ": " + e.what();
      r.pass = false;
    }
  }
};

std::vector<std::unique_ptr<Layer>> exact_layers(std::size_t c, std::size_t d, std::mt19937_64& rng) {
  std::vector<std::unique_ptr<Layer>> out;
  out.push_back(std::make_unique<Actnorm>("actnorm", c));
  for (ConvType t : kConvTypes) out.push_back(make_conv_layer(to_string(t), t, c, d, 0, rng));
  return out;
}

SuiteResult dense_logdet(std::mt19937_64& rng) {
  Suite s("dense-logdet", 1e-7);
  std::uniform_int_distribution<std::size_t> side(1, 5), chan(1, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t c = chan(rng), h = side(rng), w = side(rng), d = trial % 2 ? 3 : 1;
    for (auto& layer : exact_layers(c, d, rng)) {
      s.guarded(layer->name(), [&] {
        randomize(layer->parameters(), rng, 0.2);
        const double reported = layer->apply(Tensor4({1, c, h, w}), Direction::Forward).logdet[0];
        const double dense = lu_slogdet(basis_jacobian(layer_map(*layer, c, h, w), c * h * w)).logabsdet;
        s.record(std::abs(reported - dense), layer->name());
      });
    }
  }
  return s.r;
}

SuiteResult coupling_logdet(std::mt19937_64& rng) {
  Suite s("coupling-logdet", 1e-4);
  std::uniform_int_distribution<std::size_t> side(1, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 2 * (1 + trial % 2), h = side(rng), w = side(rng);
    Coupling layer("coupling", c, 8, rng);
    s.guarded("coupling", [&] {
      randomize(layer.parameters(), rng, 0.3);
      const Tensor4 x = random_input({1, c, h, w}, rng);
      const double reported = layer.apply(x, Direction::Forward).logdet[0];
      const double fd = lu_slogdet(central_jacobian(layer_map(layer, c, h, w), vectorize(x), 1e-5)).logabsdet;
      s.record(std::abs(reported - fd), "coupling");
    });
  }
  return s.r;
}

SuiteResult round_trip(std::mt19937_64& rng) {
  Suite s("round-trip", 1e-8);
  std::uniform_int_distribution<std::size_t> side(1, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 2 * (1 + trial % 2), h = side(rng), w = side(rng);
    std::vector<std::unique_ptr<Layer>> layers = exact_layers(c, 3, rng);
    layers.push_back(std::make_unique<Coupling>("coupling", c, 8, rng));
    layers.push_back(std::make_unique<Squeeze>("squeeze"));
    for (auto& layer : layers) {
      if (layer->kind() == "squeeze" && (h % 2 || w % 2)) continue;
      s.guarded(layer->name(), [&] {
        randomize(layer->parameters(), rng, 0.2);
        const Tensor4 x = random_input({2, c, h, w}, rng);
        const Tensor4 back = layer->apply(layer->apply(x, Direction::Forward).y, Direction::Inverse).y;
        s.record(max_abs_diff(back, x), layer->name());
      });
    }
  }
  for (ConvType t : kConvTypes) {
    ModelSpec spec;
    spec.levels = 2;
    spec.depth = 2;
    spec.width = 8;
    spec.conv = t;
    spec.channels = 2;
    spec.height = spec.image_width = 8;
    spec.seed = rng();
    FlowModel model(spec);
    s.guarded(std::string("model/") + to_string(t), [&] {
      randomize(model.parameters(), rng, 0.1);
      const Tensor4 x = random_input(spec.image_shape(2), rng);
      s.record(max_abs_diff(model.decode(model.encode(x)), x), std::string("model/") + to_string(t));
    });
  }
  return s.r;
}

SuiteResult emerging(std::mt19937_64& rng, bool zero_diagonal) {
  Suite s("emerging", 1e-8);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t c = 1 + trial % 3, d = trial % 2 ? 5 : 3, h = 4, w = 5;
    Emerging layer("emerging", c, d, rng);
    randomize(layer.parameters(), rng, 0.2);
    if (zero_diagonal && trial == 2) {
      // Seeded fault: the center tap of the last channel's self-connection.
      const std::size_t m = layer.half_size() - 1;
      layer.k1().value(c - 1, c - 1, m, m) = 0.0;
      layer.k1().bump();
    }
    s.guarded("trial " + std::to_string(trial), [&] {
      const Tensor4 x = random_input({2, c, h, w}, rng);
      const FlowResult fwd = layer.apply(x, Direction::Forward);
      s.record(max_abs_diff(layer.apply(fwd.y, Direction::Inverse).y, x), "emerging round trip");
      const Filter wf(layer.matrix().value.reshaped({c, c, 1, 1}), {});
      const RMatrix dense = dense_operator(layer.upper_filter(), h, w, Boundary::Zero).matrix *
                            (dense_operator(layer.lower_filter(), h, w, Boundary::Zero).matrix *
                             dense_operator(wf, h, w, Boundary::Zero).matrix);
      s.record(std::abs(fwd.logdet[0] - lu_slogdet(dense).logabsdet), "emerging logdet");
    });
  }
  return s.r;
}

SuiteResult combined_filter(std::mt19937_64& rng) {
  Suite s("combined-filter", 1e-10);
  std::uniform_int_distribution<std::size_t> side(1, 5), chan(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = chan(rng), p = 1 + trial % 3, h = side(rng), w = side(rng);
    const auto masked = [&](MaskVariant v) {
      const Filter mask = build_autoregressive_mask(v, p, c);
      Tensor4 taps = random_input(mask.taps().shape(), rng);
      for (std::size_t i = 0; i < taps.size(); ++i) taps[i] *= mask.taps()[i];
      return Filter(std::move(taps), mask.pad());
    };
    const Filter k1 = masked(MaskVariant::Lower), k2 = masked(MaskVariant::Upper);
    // Zero frame of width p-1 so that neither chained size-preserving
    // convolution truncates mass at the border.
    const std::size_t m = p - 1;
    const Tensor4 core = random_input({1, c, h, w}, rng);
    Tensor4 x({1, c, h + 2 * m, w + 2 * m});
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t i = 0; i < w; ++i) x(0, ch, y + m, i + m) = core(0, ch, y, i);
    const Tensor4 chained = conv2d(conv2d(x, k1, Boundary::Zero), k2, Boundary::Zero);
    const Tensor4 merged = conv2d(x, combine_filters(k2, k1), Boundary::Zero);
    s.record(max_abs_diff(chained, merged), "combined filter");
  }
  return s.r;
}

std::pair<SuiteResult, SuiteResult> periodic(std::mt19937_64& rng) {
  Suite fwd("periodic-wrap", 1e-9), ld("periodic-logdet", 1e-7);
  std::uniform_int_distribution<std::size_t> side(1, 6), chan(1, 3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t c = chan(rng), h = side(rng), w = side(rng);
    Periodic layer("periodic", c, trial % 2 ? 3 : 1, rng);
    randomize(layer.parameters(), rng, 0.2);
    fwd.guarded("periodic", [&] {
      const Tensor4 x = random_input({2, c, h, w}, rng);
      const FlowResult r = layer.apply(x, Direction::Forward);
      fwd.record(max_abs_diff(r.y, conv2d(x, layer.filter(), Boundary::Wrap)), "periodic forward");
      const double dense = lu_slogdet(dense_operator(layer.filter(), h, w, Boundary::Wrap).matrix).logabsdet;
      ld.record(std::abs(r.logdet[0] - dense), "periodic logdet");
    });
  }
  return {fwd.r, ld.r};
}

SuiteResult gradients(std::mt19937_64& rng) {
  Suite s("gradients", 1e-4);
  s.r.max_rel_error = 0.0;
  ImageTensor img({2, 2, 2, 2});
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(px(rng));
  const Tensor4 x = dequantize(img, rng);
  for (ConvType t : kConvTypes) {
    ModelSpec spec;
    spec.levels = 1;
    spec.depth = 2;
    spec.width = 6;
    spec.conv = t;
    spec.channels = 2;
    spec.height = spec.image_width = 2;
    spec.seed = rng();
    FlowModel model(spec);
    randomize(model.parameters(), rng, 0.1);
    s.guarded(std::string("gradients/") + to_string(t), [&] {
      const GradCheckReport rep =
          grad_check([&](Tape& tape) { return ad::sum(bits_per_dim(tape, model, x)); }, model.trainable_parameters());
      ++s.r.cases;
      s.r.max_abs_error = std::max(s.r.max_abs_error, rep.max_abs_error);
      s.r.max_rel_error = std::max(s.r.max_rel_error, rep.max_rel_error);
      if (!(rep.max_rel_error <= s.r.tolerance) && s.r.pass) {
        s.r.pass = false;
        s.r.detail = std::string(to_string(t)) + ": relative error " + std::to_string(rep.max_rel_error) + " at " +
                     rep.worst;
      }
    });
  }
  return s.r;
}

}  // namespace

std::vector<SuiteResult> run_check_suites(std::uint64_t seed, const std::string& fault) {
  std::mt19937_64 rng(seed);
  std::vector<SuiteResult> out;
  out.push_back(dense_logdet(rng));
  out.push_back(coupling_logdet(rng));
  out.push_back(round_trip(rng));
  out.push_back(emerging(rng, fault == "zero-diagonal"));
  out.push_back(combined_filter(rng));
  const auto [wrap, logdet] = periodic(rng);
  out.push_back(wrap);
  out.push_back(logdet);
  out.push_back(gradients(rng));
  return out;
}

std::vector<SuiteResult> cmd_check(const RunConfig& cfg, std::ostream& out) {
  const std::vector<SuiteResult> results = run_check_suites(cfg.seed, cfg.fault);
  bool ok = true;
  for (const SuiteResult& r : results) {
    out << "suite=" << r.name << " status=" << (r.pass ? "PASS" : "FAIL") << " cases=" << r.cases
        << std::scientific << std::setprecision(3) << " max_abs_err=" << r.max_abs_error;
    if (r.max_rel_error >= 0.0) out << " max_rel_err=" << r.max_rel_error;
    out << " tol=" << r.tolerance << std::defaultfloat;
    if (!r.pass) out << " detail=\"" << r.detail << "\"";
    out << "\n";
    ok = ok && r.pass;
  }
  if (!ok) throw NumericalError("invariant check failed");
  return results;
}

}  // namespace flowforge::cli
