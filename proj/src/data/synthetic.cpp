#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowforge/data.hpp"

namespace flowforge {

ImageTensor render_sinusoids(std::span<const Sinusoid> waves, std::size_t size, std::size_t channels,
                             double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, noise > 0.0 ? noise : 1.0);
  ImageTensor out({1, channels, size, size});
  const double step = 2.0 * std::numbers::pi / static_cast<double>(size);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        double v = 127.5;
        for (const Sinusoid& s : waves) {
          // Each channel sees the wave with its own phase so channels are
          // correlated but not identical.
          const double phase = s.phase + 0.7 * static_cast<double>(c);
          v += s.amplitude * std::cos(step * (s.fy * double(y) + s.fx * double(x)) + phase);
        }
        if (noise > 0.0) v += nd(rng);
        out.at(0, c, y, x) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
  return out;
}

namespace {

void place(ImageTensor& batch, std::size_t i, const ImageTensor& image) {
  std::copy(image.data.begin(), image.data.end(), batch.data.begin() + i * batch.shape.example());
}

}  // namespace

Dataset synth_periodic_textures(std::size_t n, std::size_t size, std::size_t channels, std::uint64_t seed) {
  if (size < 4) throw std::invalid_argument("texture size must be at least 4");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(2, 4), freq(-3, 3);
  std::uniform_real_distribution<double> amp(10.0, 30.0), phase(0.0, 2.0 * std::numbers::pi);
  Dataset d{ImageTensor({n, channels, size, size}), SplitTag::Train, "synthetic:textures", seed};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Sinusoid> waves(count(rng));
    for (Sinusoid& s : waves) {
      do {
        s.fy = freq(rng);
        s.fx = freq(rng);
      } while (s.fy == 0 && s.fx == 0);
      s.amplitude = amp(rng);
      s.phase = phase(rng);
    }
    place(d.images, i, render_sinusoids(waves, size, channels, 2.0, rng));
  }
  return d;
}

Dataset synth_dark_field_blobs(std::size_t n, std::size_t size, std::size_t channels, std::uint64_t seed,
                               BlobOptions options) {
  if (size < 8) throw std::invalid_argument("blob image size must be at least 8");
  if (options.min_blobs > options.max_blobs) throw std::invalid_argument("min_blobs exceeds max_blobs");
  std::mt19937_64 rng(seed);
  const double s = static_cast<double>(size);
  std::uniform_int_distribution<std::size_t> count(options.min_blobs, options.max_blobs);
  std::uniform_real_distribution<double> center(s / 4.0, 3.0 * s / 4.0), sigma(s / 16.0, s / 8.0),
      amp(120.0, 255.0), gain(0.6, 1.0);
  std::uniform_int_distribution<int> background(0, 3);
  Dataset d{ImageTensor({n, channels, size, size}), SplitTag::Train, "synthetic:blobs", seed};
  std::vector<double> field(channels * size * size);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : field) v = background(rng);
    for (std::size_t b = count(rng); b > 0; --b) {
      const double cy = center(rng), cx = center(rng), sg = sigma(rng), a = amp(rng);
      for (std::size_t c = 0; c < channels; ++c) {
        const double g = a * gain(rng);
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x) {
            const double dy = double(y) - cy, dx = double(x) - cx;
            field[(c * size + y) * size + x] += g * std::exp(-(dy * dy + dx * dx) / (2.0 * sg * sg));
          }
      }
    }
    std::uint8_t* dst = d.images.data.data() + i * d.images.shape.example();
    for (std::size_t k = 0; k < field.size(); ++k)
      dst[k] = static_cast<std::uint8_t>(std::clamp(std::round(field[k]), 0.0, 255.0));
  }
  return d;
}

}  // namespace flowforge
