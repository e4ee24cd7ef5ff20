#pragma once

// Multi-scale flow: for each level a squeeze, `depth` steps of
// actnorm → invertible conv → affine coupling, and a split on every level
// but the last. The final latent has a standard normal prior.

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "flowforge/flows.hpp"

namespace flowforge {

enum class ConvType { W1x1, PLU, QR, Emerging, Periodic };
const char* to_string(ConvType t);
/// Accepts "w1x1", "plu", "qr", "emerging", "periodic".
ConvType parse_conv_type(const std::string& s);

struct ModelSpec {
  std::size_t levels = 2;
  std::size_t depth = 4;
  std::size_t width = 64;  // coupling network width
  ConvType conv = ConvType::W1x1;
  std::size_t kernel = 3;
  std::size_t num_reflections = 0;  // QR only; 0 means one per channel
  std::size_t channels = 3, height = 16, image_width = 16;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  std::size_t dims() const { return channels * height * image_width; }
  Shape4 image_shape(std::size_t n) const { return {n, channels, height, image_width}; }

  std::vector<std::pair<std::string, std::string>> to_fields() const;
  static ModelSpec from_fields(const std::map<std::string, std::string>& fields);
  bool operator==(const ModelSpec&) const = default;
};

/// Every prior site of the model: one entry per split plus the top latent.
struct Latents {
  std::vector<Tensor4> splits;
  Tensor4 top;
};

class FlowModel {
 public:
  explicit FlowModel(ModelSpec spec);
  FlowModel(const FlowModel&) = delete;
  FlowModel& operator=(const FlowModel&) = delete;

  const ModelSpec& spec() const { return spec_; }

  /// Per-example log density of continuous inputs x, shape (n, 1, 1, 1).
  Var log_density(Tape& tape, Var x);
  /// Latents and per-example total log-Jacobian (layers only, no prior).
  Latents encode(const Tensor4& x, std::vector<double>* logdet = nullptr);
  Tensor4 decode(const Latents& z);
  /// Draws every prior site at the given temperature and decodes.
  Tensor4 sample(std::size_t n, double temperature, std::mt19937_64& rng);

  /// All parameters and buffers, in construction order.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();
  std::size_t trainable_size();
  Parameter* find(const std::string& name);

  /// Layers in forward order (splits excluded).
  std::vector<Layer*> layers();
  std::vector<Split*> splits();

 private:
  struct Level {
    std::vector<std::unique_ptr<Layer>> steps;
    std::unique_ptr<Split> split;
  };
  template <class DrawSplit>
  Tensor4 decode_with(Tensor4 top, DrawSplit draw);

  ModelSpec spec_;
  std::vector<Level> levels_;
  Shape4 top_shape_;  // per example, n = 1
};

/// Builds the invertible convolution a flow step uses for `type`.
std::unique_ptr<Layer> make_conv_layer(const std::string& name, ConvType type, std::size_t channels,
                                       std::size_t kernel, std::size_t num_reflections, std::mt19937_64& rng);

// ------------------------------------------------------------ likelihood

/// (x + u) / 256 with u ~ U[0, 1) per pixel.
Tensor4 dequantize(const ImageTensor& x, std::mt19937_64& rng);
/// (x + u) / 256 with a fixed offset u.
Tensor4 dequantize(const ImageTensor& x, double u);
/// Integer-valued tensor to 8-bit image; throws std::out_of_range naming the
/// first entry outside {0, …, 255}.
ImageTensor to_image(const Tensor4& integer_values);
/// Clamps continuous samples to [0, 1) and maps them to 0–255.
ImageTensor quantize(const Tensor4& x);

/// Per-example bits/dim of dequantized inputs: −(log p(x) − D·log 256) / (D·log 2).
Var bits_per_dim(Tape& tape, FlowModel& model, const Tensor4& x);
/// Bits/dim per example with fresh dequantization noise from rng.
std::vector<double> flow_logprob(FlowModel& model, const ImageTensor& x, std::mt19937_64& rng);
/// Samples quantized to 8-bit images.
ImageTensor flow_sample(FlowModel& model, std::size_t n, double temperature, std::mt19937_64& rng);

}  // namespace flowforge
