#include <cmath>
#include <numeric>

#include "flowforge/cli.hpp"

namespace flowforge::cli {

std::vector<double> evaluate_bpd(FlowModel& model, const ImageTensor& images, std::uint64_t seed,
                                 std::size_t batch) {
  std::mt19937_64 rng(seed);
  const Tensor4 x = dequantize(images, rng);
  std::vector<double> out;
  out.reserve(images.shape.n);
  for (std::size_t first = 0; first < images.shape.n; first += batch) {
    const std::size_t count = std::min(batch, images.shape.n - first);
    Tensor4 chunk({count, x.c(), x.h(), x.w()});
    std::copy_n(x.example(first).begin(), chunk.size(), chunk.data().begin());
    Tape tape(false);
    const Tensor4 bpd = bits_per_dim(tape, model, chunk).value();
    out.insert(out.end(), bpd.data().begin(), bpd.data().end());
  }
  return out;
}

EvalResult summarize(const std::vector<double>& values) {
  EvalResult r;
  r.count = values.size();
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(r.count);
  if (r.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std_error = std::sqrt(ss / double(r.count - 1) / double(r.count));
  }
  return r;
}

EvalResult cmd_eval(const RunConfig& cfg, std::ostream& out) {
  LoadedCheckpoint ckpt = checkpoint_load(cfg.checkpoint);
  const ModelSpec& spec = ckpt.model->spec();
  const Dataset test = load_dataset({cfg.data, SplitTag::Test, spec.height, spec.channels, spec.seed});
  if (test.images.shape.c != spec.channels || test.images.shape.h != spec.height ||
      test.images.shape.w != spec.image_width) {
    throw ValidationError("test images have shape " + to_string(test.images.shape) + " but the model expects " +
                          to_string(spec.image_shape(test.images.shape.n)));
  }
  const EvalResult r = summarize(evaluate_bpd(*ckpt.model, test.images, cfg.seed, cfg.batch));
  if (!std::isfinite(r.mean)) throw NumericalError("evaluation produced non-finite bits/dim");
  out << "eval split=test n=" << r.count << " bpd=" << r.mean << " stderr=" << r.std_error << "\n";
  return r;
}

}  // namespace flowforge::cli
