#pragma once

// Invertible layers. Every layer maps (n, c, h, w) to a tensor of the same
// size and reports the per-example log|det| of its forward Jacobian.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/autodiff.hpp"
#include "flowforge/convkit.hpp"
#include "flowforge/spectral.hpp"

namespace flowforge {

enum class Direction { Forward, Inverse };

/// Output of a layer application; logdet holds one entry per example and is
/// the log-Jacobian of the forward map (negated for Direction::Inverse).
struct FlowResult {
  Tensor4 y;
  std::vector<double> logdet;
};

/// Raised when a layer cannot be inverted with its current parameters.
class LayerNotInvertible : public std::runtime_error {
 public:
  LayerNotInvertible(std::string layer, const std::string& why)
      : std::runtime_error(layer + ": " + why), layer_(std::move(layer)) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const noexcept { return name_; }
  virtual std::string kind() const = 0;

  /// Differentiable forward: (y, per-example logdet of shape (n, 1, 1, 1)).
  virtual std::pair<Var, Var> forward(Tape& tape, Var x) = 0;
  /// Exact inverse with the negated forward logdet at the recovered input.
  virtual FlowResult inverse(const Tensor4& y) = 0;
  /// Trainable parameters followed by fixed buffers, in a stable order.
  virtual std::vector<Parameter*> parameters() { return {}; }

  FlowResult apply(const Tensor4& x, Direction dir);

 protected:
  std::string name_;
};

/// y = x·exp(log_scale) + bias per channel, with data-dependent init on the
/// first forward batch: zero mean, unit (population) std per channel.
class Actnorm final : public Layer {
 public:
  Actnorm(std::string name, std::size_t channels);
  std::string kind() const override { return "actnorm"; }
  std::pair<Var, Var> forward(Tape& tape, Var x) override;
  FlowResult inverse(const Tensor4& y) override;
  std::vector<Parameter*> parameters() override { return {&log_scale_, &bias_, &initialized_}; }

  bool initialized() const { return initialized_.value[0] != 0.0; }
  void initialize(const Tensor4& x);
  Parameter& log_scale() { return log_scale_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter log_scale_, bias_, initialized_;
};

/// Affine coupling: the first c/2 channels are scaled by sigmoid(raw + 2) and
/// shifted, both predicted from the second half by a 3×3 → 1×1 → 3×3 network
/// whose last convolution starts at zero.
class Coupling final : public Layer {
 public:
  Coupling(std::string name, std::size_t channels, std::size_t width, std::mt19937_64& rng);
  std::string kind() const override { return "coupling"; }
  std::pair<Var, Var> forward(Tape& tape, Var x) override;
  FlowResult inverse(const Tensor4& y) override;
  std::vector<Parameter*> parameters() override;

 private:
  // (scale, shift) for conditioning half xb.
  std::pair<Var, Var> conditioner(Tape& tape, Var xb);

  std::size_t channels_;
  Parameter w0_, b0_, w1_, b1_, w2_, b2_;
};

enum class Inv1x1Variant { Plain, PLU, QR };
const char* to_string(Inv1x1Variant v);

/// Per-pixel channel mixing y = W·x with three parameterizations of W:
/// PLAIN stores W; PLU stores W = P·(L + I)·(U + diag(sign·exp(log_s)));
/// QR stores W = Q·(R + diag(sign·exp(log_s))) with Q a product of
/// Householder reflections.
class Inv1x1 final : public Layer {
 public:
  static constexpr std::size_t kDefaultReflections = static_cast<std::size_t>(-1);

  /// QR uses `num_reflections` Householder vectors, c by default.
  Inv1x1(std::string name, std::size_t channels, Inv1x1Variant variant, std::mt19937_64& rng,
         std::size_t num_reflections = kDefaultReflections);
  std::string kind() const override { return std::string("inv1x1-") + to_string(variant_); }
  std::pair<Var, Var> forward(Tape& tape, Var x) override;
  FlowResult inverse(const Tensor4& y) override;
  std::vector<Parameter*> parameters() override;

  Inv1x1Variant variant() const { return variant_; }
  /// W (and h·w-free log|det W|) assembled from the current parameters.
  RMatrix weight();
  double logabsdet_weight();

  Parameter& matrix() { return w_; }
  Parameter& lower() { return l_; }
  Parameter& upper() { return u_; }
  Parameter& log_s() { return log_s_; }
  Parameter& sign() { return sign_; }
  Parameter& permutation() { return p_; }
  Parameter& reflections() { return v_; }

 private:
  Var compose(Tape& tape);
  Var logdet_per_pixel(Tape& tape, Var w);

  std::size_t channels_;
  Inv1x1Variant variant_;
  std::size_t reflections_;
  Parameter w_, l_, u_, log_s_, sign_, p_, v_;
};

/// x → W·x → k1 ⋆ (LOWER mask) → k2 ⋆ (UPPER mask); p = (d + 1) / 2.
/// Inverse solves k2 by descending substitution, k1 ascending, then W⁻¹.
class Emerging final : public Layer {
 public:
  Emerging(std::string name, std::size_t channels, std::size_t kernel, std::mt19937_64& rng);
  std::string kind() const override { return "emerging"; }
  std::pair<Var, Var> forward(Tape& tape, Var x) override;
  FlowResult inverse(const Tensor4& y) override;
  std::vector<Parameter*> parameters() override { return {&w_, &k1_, &k2_}; }

  /// Masked filters as used by the layer.
  Filter lower_filter() const;
  Filter upper_filter() const;
  Parameter& matrix() { return w_; }
  Parameter& k1() { return k1_; }
  Parameter& k2() { return k2_; }
  std::size_t half_size() const { return p_; }

 private:
  std::size_t channels_, p_;
  Filter m1_, m2_;
  Parameter w_, k1_, k2_;
};

/// Unconstrained d×d filter applied with wrap-around boundaries, evaluated
/// per frequency. The inverse caches Ŵ_uv⁻¹ keyed by the filter version.
class Periodic final : public Layer {
 public:
  Periodic(std::string name, std::size_t channels, std::size_t kernel, std::mt19937_64& rng);
  std::string kind() const override { return "periodic"; }
  std::pair<Var, Var> forward(Tape& tape, Var x) override;
  FlowResult inverse(const Tensor4& y) override;
  std::vector<Parameter*> parameters() override { return {&f_}; }

  Filter filter() const;
  Parameter& weight() { return f_; }
  void clear_cache();
  bool cache_valid(std::size_t h, std::size_t w) const;

 private:
  struct Cache {
    std::uint64_t version;
    std::size_t h, w;
    std::shared_ptr<const FilterSpectrum> inverse;
    double logdet;  // Σ_uv log|det Ŵ_uv|
  };
  Cache cached_inverse(std::size_t h, std::size_t w);

  std::size_t channels_;
  Parameter f_;
  mutable std::mutex cache_mutex_;
  std::optional<Cache> cache_;
};

/// 2×2 space-to-depth; output channel 4c + k holds input channel c at
/// position k ∈ (TL, TR, BL, BR).
class Squeeze final : public Layer {
 public:
  explicit Squeeze(std::string name) : Layer(std::move(name)) {}
  std::string kind() const override { return "squeeze"; }
  std::pair<Var, Var> forward(Tape& tape, Var x) override;
  FlowResult inverse(const Tensor4& y) override;
};

/// Factors out the second half of the channels under N(μ, σ²) where
/// (μ, log σ) come from a zero-initialized 3×3 convolution of the kept half.
class Split {
 public:
  Split(std::string name, std::size_t channels);

  struct Forward {
    Var kept, logp, z;  // logp per example
  };
  Forward forward(Tape& tape, Var x);
  /// Inverse given the factored-out half.
  Tensor4 inverse(const Tensor4& kept, const Tensor4& z);
  /// z = μ + temperature·σ·ε with ε ~ N(0, I).
  Tensor4 sample(const Tensor4& kept, double temperature, std::mt19937_64& rng);
  std::vector<Parameter*> parameters() { return {&w_, &b_}; }
  const std::string& name() const { return name_; }

 private:
  std::pair<Tensor4, Tensor4> prior(const Tensor4& kept);

  std::string name_;
  std::size_t channels_;
  Parameter w_, b_;
};

/// Random orthogonal c×c matrix (product of c random reflections).
RMatrix random_rotation(std::size_t c, std::mt19937_64& rng);

}  // namespace flowforge
