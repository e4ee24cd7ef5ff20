#pragma once

// Eager reverse-mode differentiation. Every op computes its value as soon as
// it is recorded; when the tape is recording and some input requires a
// gradient, the op also stores a backward rule. One backward pass per tape.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowforge/convkit.hpp"
#include "flowforge/tensor.hpp"

namespace flowforge {

/// Named trainable array owned by a layer. `version` increases on every
/// mutation so caches derived from the value can detect staleness.
struct Parameter {
  std::string name;
  Tensor4 value;
  std::size_t rank = 4;  // logical rank: trailing dims of value.shape()
  bool trainable = true;
  std::uint64_t version = 0;

  void bump() noexcept { ++version; }
  std::vector<std::size_t> dims() const;
};

Parameter make_vector_parameter(std::string name, std::size_t k, double fill = 0.0);
Parameter make_matrix_parameter(std::string name, std::size_t rows, std::size_t cols);
Parameter make_filter_parameter(std::string name, Shape4 shape);

enum class OpKind {
  Constant,
  Leaf,
  Param,
  Add,
  Sub,
  Mul,
  AddScalar,
  Scale,
  Exp,
  Log,
  Sigmoid,
  Relu,
  Sum,
  SumPerExample,
  ExpandBatch,
  SliceChannels,
  ConcatChannels,
  Squeeze,
  Unsqueeze,
  Reshape,
  Conv2d,
  DftLinearMap,
  PixelMatmul,
  AffineChannel,
  AddChannel,
  Matmul,
  Diag,
  Householder,
  LogAbsDet,
  LogAbsSelect,
  PeriodicLogdet,
  GaussianLogp,
  StdNormalLogp,
};

const char* to_string(OpKind k);

/// Non-tensor arguments of an op; each kind reads only the fields it needs.
struct OpAttrs {
  double scalar = 0.0;
  Padding pad{};
  bool has_pad = false;
  Boundary boundary = Boundary::Zero;
  std::size_t begin = 0, count = 0;
  Shape4 shape{};
  std::vector<std::size_t> indices;
};

class Tape;

/// Handle to a node of a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor4& value() const;
  const Shape4& shape() const { return value().shape(); }
};

class GradientMap {
 public:
  /// Gradient of a bound parameter; zeros when the loss does not depend on it.
  const Tensor4& operator[](const Parameter& p) const;
  /// Gradient of a leaf created with requires_grad.
  const Tensor4& operator[](Var leaf) const;
  bool contains(const Parameter& p) const { return params_.contains(&p); }
  const std::unordered_map<const Parameter*, Tensor4>& parameters() const { return params_; }

 private:
  friend class Tape;
  std::unordered_map<const Parameter*, Tensor4> params_;
  std::unordered_map<std::size_t, Tensor4> leaves_;
};

/// Backward rule: receives d loss/d output and one accumulator per input;
/// an accumulator is null when that input needs no gradient.
using BackwardFn = std::function<void(const Tensor4& grad_out, std::span<Tensor4* const> grad_in)>;

class Tape {
 public:
  /// A non-recording tape only evaluates; it never stores backward rules.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor4 value);
  Var leaf(Tensor4 value, bool requires_grad = true);
  /// Binds p once per tape; later calls return the same node.
  Var parameter(Parameter& p);

  const Tensor4& value(Var v) const;
  bool requires_grad(Var v) const;
  OpKind kind(Var v) const;
  const std::vector<std::size_t>& inputs(Var v) const;

  /// Dispatches to the forward/backward rule of `kind`.
  Var record(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});

  /// d loss/d every parameter and requires-grad leaf reachable from loss.
  GradientMap backward(Var loss);

  /// Low-level append used by the op implementations.
  Var push(OpKind kind, Tensor4 value, std::vector<std::size_t> inputs, BackwardFn backward);

 private:
  struct Node {
    OpKind kind;
    Tensor4 value;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  const Node& node(Var v) const;

  bool record_;
  bool consumed_ = false;
  std::deque<Node> nodes_;  // deque keeps value references stable across appends
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

// Typed builders; all go through Tape::record.
namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_scalar(Var a, double s);
Var scale(Var a, double s);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var relu(Var a);
/// Sum of all entries, shape (1, 1, 1, 1).
Var sum(Var a);
/// Per-example sum, shape (n, 1, 1, 1).
Var sum_per_example(Var a);
/// Repeats a (1, 1, 1, 1) scalar into (n, 1, 1, 1).
Var expand_batch(Var s, std::size_t n);
Var slice_channels(Var x, std::size_t begin, std::size_t count);
Var concat_channels(Var a, Var b);
/// 2×2 space-to-depth, channel order per input channel: TL, TR, BL, BR.
Var squeeze2x2(Var x);
Var unsqueeze2x2(Var x);
Var reshape(Var x, Shape4 shape);
/// Cross-correlation with filter taps f (c_out, c_in, kh, kw).
Var conv2d(Var x, Var f, Padding pad, Boundary boundary);
/// Wrap-around convolution evaluated in the frequency domain.
Var periodic_conv(Var x, Var f, Padding pad);
/// Per-pixel channel mixing y[:, co] = Σ_ci W[co, ci]·x[:, ci], W as (1, 1, c_out, c_in).
Var pixel_matmul(Var x, Var w);
/// y = x·scale[c] + bias[c]; scale and bias are (1, 1, 1, c) vectors.
Var affine_channel(Var x, Var scale, Var bias);
Var add_channel(Var x, Var bias);
/// Matrix product of (1, 1, r, k) and (1, 1, k, c).
Var matmul(Var a, Var b);
/// (1, 1, 1, k) vector to (1, 1, k, k) diagonal matrix.
Var diag(Var v);
/// Q = Π_i (I - 2 v_i v_iᵀ / v_iᵀv_i) with reflection vectors as rows of (1, 1, k, n).
Var householder(Var vectors);
/// log|det W| of a (1, 1, c, c) matrix.
Var logabsdet(Var w);
/// Σ_i log|a[indices[i]]| over flat indices.
Var logabs_select(Var a, std::vector<std::size_t> indices);
/// Σ_uv log|det Ŵ_uv| of a wrap-around filter on an h×w image.
Var periodic_logdet(Var f, Padding pad, std::size_t h, std::size_t w);
/// Per-example Σ log N(z; mean, exp(log_scale)²).
Var gaussian_logp(Var z, Var mean, Var log_scale);
/// Per-example Σ log N(z; 0, 1).
Var std_normal_logp(Var z);

}  // namespace ad

/// Worst relative error between tape gradients and central differences of
/// fn over every coordinate of every parameter. Relative error is
/// |a − n| / max(floor, |a|, |n|).
struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // "name[index]"
  std::size_t coordinates = 0;
};

GradCheckReport grad_check(const std::function<Var(Tape&)>& fn, std::span<Parameter* const> params,
                           double step = 1e-5, double floor = 1e-6);

}  // namespace flowforge
