#include <chrono>
#include <cstdio>
#include <sstream>

#include "flowforge/cli.hpp"
#include "flowforge/parallel.hpp"

namespace flowforge::cli {
namespace {

template <class F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// y[:, co] = Σ_ci m(co, ci) · x[:, ci] at every pixel.
Tensor4 mix_channels(const Tensor4& x, const RMatrix& m) {
  Tensor4 y(x.shape());
  const std::size_t plane = x.shape().plane();
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t co = 0; co < x.c(); ++co)
      for (std::size_t ci = 0; ci < x.c(); ++ci) {
        const double a = m(co, ci);
        const double* src = x.data().data() + x.index(n, ci, 0, 0);
        double* dst = y.data().data() + y.index(n, co, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) dst[i] += a * src[i];
      }
  return y;
}

RMatrix weight_matrix(Emerging& e) {
  const std::size_t c = e.matrix().value.h();
  RMatrix w(c, c);
  for (std::size_t i = 0; i < c * c; ++i) w.data()[i] = e.matrix().value[i];
  return w;
}

Tensor4 substitution_inverse(Emerging& e, const Tensor4& y, SubstitutionMode mode, std::size_t workers) {
  const Tensor4 u = solve_autoregressive(y, e.upper_filter(), MaskVariant::Upper, mode, workers);
  const Tensor4 v = solve_autoregressive(u, e.lower_filter(), MaskVariant::Lower, mode, workers);
  return mix_channels(v, inverse(weight_matrix(e)));
}

}  // namespace

BenchResult run_bench(std::size_t batch, std::size_t size, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  BenchResult result;
  result.workers = worker_count();
  const double per = 1.0 / double(batch);

  Emerging layer("bench.emerging", channels, 3, rng);
  for (Parameter* p : layer.parameters()) {
    for (double& v : p->value.data()) v += 0.05 * nd(rng);
    p->bump();
  }
  Tensor4 x({batch, channels, size, size});
  for (double& v : x.data()) v = nd(rng);
  const Tensor4 y = layer.apply(x, Direction::Forward).y;

  // (a) Invert the full (c·h·w)² operator, then apply it per example.
  Tensor4 dense_x;
  const auto dense = [&] {
    const Filter wf(layer.matrix().value.reshaped({channels, channels, 1, 1}), {});
    const RMatrix op = dense_operator(layer.upper_filter(), size, size, Boundary::Zero).matrix *
                       (dense_operator(layer.lower_filter(), size, size, Boundary::Zero).matrix *
                        dense_operator(wf, size, size, Boundary::Zero).matrix);
    const RMatrix inv = inverse(op);
    dense_x = Tensor4(y.shape());
    for (std::size_t n = 0; n < batch; ++n) {
      // The operator acts on raster-order vectors, channel index fastest.
      const std::vector<double> v = vectorize(y, n);
      const Tensor4 r = unvectorize(inv * std::span<const double>(v), channels, size, size);
      std::copy(r.data().begin(), r.data().end(), dense_x.example(n).begin());
    }
  };
  BenchRow row_dense{"dense inversion", time_ms(dense) * per, time_ms(dense) * per};

  // (b) One example at a time on one thread.
  Tensor4 seq_x(y.shape());
  const auto sequential = [&] {
    for (std::size_t n = 0; n < batch; ++n) {
      Tensor4 one({1, channels, size, size});
      std::copy(y.example(n).begin(), y.example(n).end(), one.data().begin());
      const Tensor4 r = substitution_inverse(layer, one, SubstitutionMode::Sequential, 1);
      std::copy(r.data().begin(), r.data().end(), seq_x.example(n).begin());
    }
  };
  BenchRow row_seq{"sequential substitution", time_ms(sequential) * per, time_ms(sequential) * per};

  // (c) Whole batch per raster step, chunks of the batch across workers.
  Tensor4 par_x;
  const auto parallel = [&] {
    par_x = substitution_inverse(layer, y, SubstitutionMode::BatchParallel, result.workers);
  };
  BenchRow row_par{"batch-parallel substitution", time_ms(parallel) * per, time_ms(parallel) * per};

  // (d) Periodic inverse with the per-frequency inverse blocks rebuilt
  // (cold) or reused from the cache (warm).
  Periodic periodic("bench.periodic", channels, 3, rng);
  const Tensor4 py = periodic.apply(x, Direction::Forward).y;
  Tensor4 per_x;
  double cold = INFINITY, warm = INFINITY;
  for (int rep = 0; rep < 3; ++rep) {
    periodic.clear_cache();
    cold = std::min(cold, time_ms([&] { per_x = periodic.inverse(py).y; }));
    warm = std::min(warm, time_ms([&] { per_x = periodic.inverse(py).y; }));
  }
  BenchRow row_periodic{"periodic inverse (cached spectrum)", cold * per, warm * per};

  result.rows = {row_dense, row_seq, row_par, row_periodic};
  result.max_inverse_error = std::max({max_abs_diff(dense_x, x), max_abs_diff(seq_x, x), max_abs_diff(par_x, x),
                                       max_abs_diff(per_x, x)});
  return result;
}

std::string bench_table(const BenchResult& r) {
  std::ostringstream s;
  s << "| method | cold ms/example | warm ms/example |\n";
  s << "|---|---:|---:|\n";
  char buf[64];
  for (const BenchRow& row : r.rows) {
    s << "| " << row.method;
    std::snprintf(buf, sizeof buf, " | %.4f | %.4f |\n", row.cold_ms, row.warm_ms);
    s << buf;
  }
  return s.str();
}

BenchResult cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const BenchResult r = run_bench(cfg.bench_batch, cfg.bench_size, cfg.bench_channels, cfg.seed);
  out << "workers=" << r.workers << " batch=" << cfg.bench_batch << " size=" << cfg.bench_size
      << " channels=" << cfg.bench_channels << "\n\n";
  out << bench_table(r) << "\n";
  out << "speedup batch-parallel vs dense=" << r.rows[0].warm_ms / r.rows[2].warm_ms << "\n";
  out << "speedup periodic warm vs cold=" << r.rows[3].cold_ms / r.rows[3].warm_ms << "\n";
  out << "max inverse error=" << r.max_inverse_error << "\n";
  if (!(r.max_inverse_error < 1e-6)) throw NumericalError("bench inverses disagree with the input");
  return r;
}

}  // namespace flowforge::cli
