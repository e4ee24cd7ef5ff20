#include "flowforge/autodiff.hpp"

#include <optional>

namespace flowforge {

std::vector<std::size_t> Parameter::dims() const {
  const Shape4& s = value.shape();
  const std::size_t all[4] = {s.n, s.c, s.h, s.w};
  return {all + (4 - rank), all + 4};
}

Parameter make_vector_parameter(std::string name, std::size_t k, double fill) {
  return {std::move(name), Tensor4({1, 1, 1, k}, fill), 1};
}

Parameter make_matrix_parameter(std::string name, std::size_t rows, std::size_t cols) {
  return {std::move(name), Tensor4({1, 1, rows, cols}), 2};
}

Parameter make_filter_parameter(std::string name, Shape4 shape) { return {std::move(name), Tensor4(shape), 4}; }

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Constant: return "constant";
    case OpKind::Leaf: return "leaf";
    case OpKind::Param: return "parameter";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Scale: return "scale";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Relu: return "relu";
    case OpKind::Sum: return "sum";
    case OpKind::SumPerExample: return "sum_per_example";
    case OpKind::ExpandBatch: return "expand_batch";
    case OpKind::SliceChannels: return "slice_channels";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::Squeeze: return "squeeze";
    case OpKind::Unsqueeze: return "unsqueeze";
    case OpKind::Reshape: return "reshape";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::DftLinearMap: return "dft_linear_map";
    case OpKind::PixelMatmul: return "pixel_matmul";
    case OpKind::AffineChannel: return "affine_channel";
    case OpKind::AddChannel: return "add_channel";
    case OpKind::Matmul: return "matmul";
    case OpKind::Diag: return "diag";
    case OpKind::Householder: return "householder";
    case OpKind::LogAbsDet: return "logabsdet";
    case OpKind::LogAbsSelect: return "logabs_select";
    case OpKind::PeriodicLogdet: return "periodic_logdet";
    case OpKind::GaussianLogp: return "gaussian_logp";
    case OpKind::StdNormalLogp: return "std_normal_logp";
  }
  return "unknown";
}

const Tensor4& Var::value() const {
  if (!tape) throw std::logic_error("Var: unbound handle");
  return tape->value(*this);
}

const Tensor4& GradientMap::operator[](const Parameter& p) const {
  const auto it = params_.find(&p);
  if (it == params_.end()) throw std::out_of_range("GradientMap: parameter '" + p.name + "' was not bound");
  return it->second;
}

const Tensor4& GradientMap::operator[](Var leaf) const {
  const auto it = leaves_.find(leaf.id);
  if (it == leaves_.end()) throw std::out_of_range("GradientMap: variable is not a requires-grad leaf");
  return it->second;
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this) throw std::invalid_argument("variable belongs to a different tape");
  if (v.id >= nodes_.size()) throw std::out_of_range("variable id out of range");
  return nodes_[v.id];
}

const Tensor4& Tape::value(Var v) const { return node(v).value; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }
OpKind Tape::kind(Var v) const { return node(v).kind; }
const std::vector<std::size_t>& Tape::inputs(Var v) const { return node(v).inputs; }

Var Tape::constant(Tensor4 value) {
  nodes_.push_back({OpKind::Constant, std::move(value), {}, false, {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor4 value, bool requires_grad) {
  nodes_.push_back({OpKind::Leaf, std::move(value), {}, requires_grad && record_, {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  if (const auto it = bound_.find(&p); it != bound_.end()) return {this, it->second};
  nodes_.push_back({OpKind::Param, p.value, {}, record_ && p.trainable, {}, &p});
  bound_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::push(OpKind kind, Tensor4 value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  if (record_)
    for (std::size_t i : inputs) needs = needs || nodes_[i].requires_grad;
  nodes_.push_back({kind, std::move(value), std::move(inputs), needs, needs ? std::move(backward) : BackwardFn{},
                    nullptr});
  return {this, nodes_.size() - 1};
}

GradientMap Tape::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + to_string(root.value.shape()));
  }
  if (consumed_) throw std::logic_error("backward: this tape was already differentiated");
  if (!root.requires_grad) {
    throw std::invalid_argument("backward: loss is detached from every differentiable variable");
  }
  consumed_ = true;

  std::vector<std::optional<Tensor4>> grads(loss.id + 1);
  grads[loss.id] = Tensor4(root.value.shape(), 1.0);
  std::vector<Tensor4*> slots;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!grads[i] || !n.backward) continue;
    slots.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t in = n.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (!grads[in]) grads[in] = Tensor4(nodes_[in].value.shape());
      slots[k] = &*grads[in];
    }
    n.backward(*grads[i], slots);
    if (n.kind != OpKind::Param && n.kind != OpKind::Leaf) grads[i].reset();  // free intermediate
  }

  GradientMap out;
  for (const auto& [p, id] : bound_) {
    if (!nodes_[id].requires_grad) continue;
    out.params_.emplace(p, id < grads.size() && grads[id] ? std::move(*grads[id]) : Tensor4(p->value.shape()));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != OpKind::Leaf || !nodes_[i].requires_grad) continue;
    out.leaves_.emplace(i, i < grads.size() && grads[i] ? std::move(*grads[i]) : Tensor4(nodes_[i].value.shape()));
  }
  return out;
}

}  // namespace flowforge
