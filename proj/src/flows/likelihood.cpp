#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowforge/model.hpp"

namespace flowforge {

Tensor4 dequantize(const ImageTensor& x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor4 out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x.data[i] + u(rng)) / 256.0;
  return out;
}

Tensor4 dequantize(const ImageTensor& x, double u) {
  Tensor4 out(x.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x.data[i] + u) / 256.0;
  return out;
}

ImageTensor to_image(const Tensor4& v) {
  ImageTensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (!(x >= 0.0 && x <= 255.0) || x != std::floor(x)) {
      throw std::out_of_range("pixel " + std::to_string(i) + " has value " + std::to_string(x) +
                              ", expected an integer in [0, 255]");
    }
    out.data[i] = static_cast<std::uint8_t>(x);
  }
  return out;
}

ImageTensor quantize(const Tensor4& x) {
  ImageTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = std::isfinite(x[i]) ? std::floor(x[i] * 256.0) : 0.0;
    out.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

Var bits_per_dim(Tape& tape, FlowModel& model, const Tensor4& x) {
  const double dims = static_cast<double>(model.spec().dims());
  const Var logp = model.log_density(tape, tape.constant(x));
  // Discrete log-likelihood: the 1/256 scaling adds −D·log 256.
  const Var nll = ad::add_scalar(ad::scale(logp, -1.0), dims * std::log(256.0));
  return ad::scale(nll, 1.0 / (dims * std::numbers::ln2));
}

std::vector<double> flow_logprob(FlowModel& model, const ImageTensor& x, std::mt19937_64& rng) {
  Tape tape(false);
  const Tensor4 bpd = bits_per_dim(tape, model, dequantize(x, rng)).value();
  return {bpd.data().begin(), bpd.data().end()};
}

ImageTensor flow_sample(FlowModel& model, std::size_t n, double temperature, std::mt19937_64& rng) {
  return quantize(model.sample(n, temperature, rng));
}

}  // namespace flowforge
