#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "flowforge/cli.hpp"

namespace flowforge::cli {
namespace {

constexpr std::size_t kMonitorSize = 256;

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Tensor4> m, v;
  std::size_t t = 0;

  explicit Adam(const std::vector<Parameter*>& params) {
    for (const Parameter* p : params) {
      m.emplace_back(p->value.shape());
      v.emplace_back(p->value.shape());
    }
  }

  void step(const std::vector<Parameter*>& params, const GradientMap& grads, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, double(t)), c2 = 1.0 - std::pow(beta2, double(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!grads.contains(*params[k])) continue;
      const Tensor4& g = grads[*params[k]];
      Tensor4& value = params[k]->value;
      for (std::size_t i = 0; i < value.size(); ++i) {
        m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g[i];
        v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g[i] * g[i];
        value[i] -= lr * (m[k][i] / c1) / (std::sqrt(v[k][i] / c2) + eps);
      }
      params[k]->bump();
    }
  }
};

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double monitor_bpd(FlowModel& model, const Tensor4& x) {
  Tape tape(false);
  return mean(bits_per_dim(tape, model, x).value().data());
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Dataset train = load_dataset({cfg.data, SplitTag::Train, cfg.image_size, cfg.channels, cfg.seed});
  const Shape4 shape = train.images.shape;
  FlowModel model(model_spec(cfg, shape.c, shape.h, shape.w));
  std::mt19937_64 rng(cfg.seed);

  // A fixed, pre-dequantized slice of the training set measures progress;
  // its first forward also performs the data-dependent actnorm init.
  const std::size_t monitor_n = std::min(kMonitorSize, shape.n);
  std::mt19937_64 monitor_rng(cfg.seed + 1);
  const Tensor4 monitor = dequantize(train.images.slice(0, monitor_n), monitor_rng);

  TrainResult result;
  result.init_bpd = monitor_bpd(model, monitor);
  out << "init bpd=" << result.init_bpd << " params=" << model.trainable_size() << "\n";

  const std::vector<Parameter*> params = model.trainable_parameters();
  Adam adam(params);
  std::vector<std::size_t> order(shape.n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = shape.n;  // forces a shuffle before the first batch
  const std::size_t batch = std::min(cfg.batch, shape.n);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cursor + batch > shape.n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const ImageTensor images = train.images.gather(std::span(order).subspan(cursor, batch));
    cursor += batch;
    // Fresh noise every time an image is visited, i.e. once per epoch.
    const Tensor4 x = dequantize(images, rng);

    Tape tape;
    const Var loss = ad::scale(ad::sum(bits_per_dim(tape, model, x)), 1.0 / double(batch));
    const double value = loss.value().item();
    const GradientMap grads = tape.backward(loss);
    double sq = 0.0;
    for (const Parameter* p : params)
      if (grads.contains(*p))
        for (double g : grads[*p].data()) sq += g * g;
    const double gnorm = std::sqrt(sq);
    if (!std::isfinite(value) || !std::isfinite(gnorm)) {
      throw NumericalError("non-finite loss or gradient at step " + std::to_string(step) +
                           "; the last checkpoint at " + cfg.checkpoint + " (if any) was kept");
    }
    // Checkpoints capture parameters whose loss was just seen to be finite,
    // so an abort later never leaves a diverged model on disk.
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      checkpoint_save(model, cfg.checkpoint, {step, rng_text(rng)});
    }
    result.losses.push_back(value);
    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      out << "step=" << step << " bpd=" << value << " gnorm=" << gnorm << "\n";
    }

    const double warm = cfg.warmup == 0 ? 1.0 : std::min(1.0, double(step + 1) / double(cfg.warmup));
    adam.step(params, grads, cfg.lr * warm);
  }

  result.final_bpd = monitor_bpd(model, monitor);
  if (!std::isfinite(result.final_bpd)) {
    throw NumericalError("training diverged: final bits/dim is not finite; the last checkpoint was kept");
  }
  checkpoint_save(model, cfg.checkpoint, {cfg.steps, rng_text(rng)});
  out << "final steps=" << cfg.steps << " init_bpd=" << result.init_bpd << " final_bpd=" << result.final_bpd
      << " checkpoint=" << cfg.checkpoint << "\n";
  return result;
}

}  // namespace flowforge::cli
