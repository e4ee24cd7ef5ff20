#include "flowforge/model.hpp"

#include <charconv>

namespace flowforge {

const char* to_string(ConvType t) {
  switch (t) {
    case ConvType::W1x1: return "w1x1";
    case ConvType::PLU: return "plu";
    case ConvType::QR: return "qr";
    case ConvType::Emerging: return "emerging";
    case ConvType::Periodic: return "periodic";
  }
  return "unknown";
}

ConvType parse_conv_type(const std::string& s) {
  for (ConvType t : {ConvType::W1x1, ConvType::PLU, ConvType::QR, ConvType::Emerging, ConvType::Periodic})
    if (s == to_string(t)) return t;
  throw std::invalid_argument("unknown conv type '" + s + "' (expected w1x1, plu, qr, emerging or periodic)");
}

void ModelSpec::validate() const {
  if (channels == 0 || height == 0 || image_width == 0) throw std::invalid_argument("image extents must be positive");
  if (width == 0) throw std::invalid_argument("coupling width must be positive");
  if (levels > 16) throw std::invalid_argument("too many levels");
  const std::size_t f = std::size_t{1} << levels;
  if (height % f != 0 || image_width % f != 0) {
    throw std::invalid_argument("image size " + std::to_string(height) + "x" + std::to_string(image_width) +
                                " is not divisible by 2^levels = " + std::to_string(f));
  }
  if ((conv == ConvType::Emerging || conv == ConvType::Periodic) && (kernel == 0 || kernel % 2 == 0)) {
    throw std::invalid_argument("kernel size must be odd and positive, got " + std::to_string(kernel));
  }
}

std::vector<std::pair<std::string, std::string>> ModelSpec::to_fields() const {
  return {{"levels", std::to_string(levels)},
          {"depth", std::to_string(depth)},
          {"width", std::to_string(width)},
          {"conv", to_string(conv)},
          {"kernel", std::to_string(kernel)},
          {"num_reflections", std::to_string(num_reflections)},
          {"channels", std::to_string(channels)},
          {"height", std::to_string(height)},
          {"image_width", std::to_string(image_width)},
          {"seed", std::to_string(seed)}};
}

ModelSpec ModelSpec::from_fields(const std::map<std::string, std::string>& fields) {
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument(std::string("model spec is missing '") + key + "'");
    return it->second;
  };
  const auto number = [&](const char* key) {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw std::invalid_argument(std::string("model spec field '") + key + "' is not an integer: '" + s + "'");
    }
    return v;
  };
  ModelSpec m;
  m.levels = number("levels");
  m.depth = number("depth");
  m.width = number("width");
  m.conv = parse_conv_type(get("conv"));
  m.kernel = number("kernel");
  m.num_reflections = number("num_reflections");
  m.channels = number("channels");
  m.height = number("height");
  m.image_width = number("image_width");
  m.seed = number("seed");
  m.validate();
  return m;
}

std::unique_ptr<Layer> make_conv_layer(const std::string& name, ConvType type, std::size_t channels,
                                       std::size_t kernel, std::size_t num_reflections, std::mt19937_64& rng) {
  switch (type) {
    case ConvType::W1x1: return std::make_unique<Inv1x1>(name, channels, Inv1x1Variant::Plain, rng);
    case ConvType::PLU: return std::make_unique<Inv1x1>(name, channels, Inv1x1Variant::PLU, rng);
    case ConvType::QR:
      return std::make_unique<Inv1x1>(name, channels, Inv1x1Variant::QR, rng,
                                      num_reflections == 0 ? Inv1x1::kDefaultReflections : num_reflections);
    case ConvType::Emerging: return std::make_unique<Emerging>(name, channels, kernel, rng);
    case ConvType::Periodic: return std::make_unique<Periodic>(name, channels, kernel, rng);
  }
  throw std::invalid_argument("unknown conv type");
}

FlowModel::FlowModel(ModelSpec spec) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(spec_.seed);
  std::size_t c = spec_.channels, h = spec_.height, w = spec_.image_width;
  for (std::size_t l = 0; l < spec_.levels; ++l) {
    const std::string prefix = "L" + std::to_string(l);
    Level level;
    level.steps.push_back(std::make_unique<Squeeze>(prefix + ".squeeze"));
    c *= 4;
    h /= 2;
    w /= 2;
    for (std::size_t k = 0; k < spec_.depth; ++k) {
      const std::string step = prefix + ".F" + std::to_string(k);
      level.steps.push_back(std::make_unique<Actnorm>(step + ".actnorm", c));
      level.steps.push_back(make_conv_layer(step + ".conv", spec_.conv, c, spec_.kernel, spec_.num_reflections, rng));
      level.steps.push_back(std::make_unique<Coupling>(step + ".coupling", c, spec_.width, rng));
    }
    if (l + 1 < spec_.levels) {
      level.split = std::make_unique<Split>(prefix + ".split", c);
      c /= 2;
    }
    levels_.push_back(std::move(level));
  }
  top_shape_ = {1, c, h, w};
}

Var FlowModel::log_density(Tape& tape, Var x) {
  if (x.shape() != spec_.image_shape(x.shape().n)) {
    throw std::invalid_argument("input shape " + to_string(x.shape()) + " does not match the model image " +
                                to_string(spec_.image_shape(x.shape().n)));
  }
  Var h = x;
  Var total = tape.constant(Tensor4({x.shape().n, 1, 1, 1}));
  for (Level& level : levels_) {
    for (auto& layer : level.steps) {
      const auto [y, ld] = layer->forward(tape, h);
      h = y;
      total = ad::add(total, ld);
    }
    if (level.split) {
      const Split::Forward f = level.split->forward(tape, h);
      total = ad::add(total, f.logp);
      h = f.kept;
    }
  }
  return ad::add(total, ad::std_normal_logp(h));
}

Latents FlowModel::encode(const Tensor4& x, std::vector<double>* logdet) {
  Tape tape(false);
  Latents out;
  Var h = tape.constant(x);
  Var total = tape.constant(Tensor4({x.n(), 1, 1, 1}));
  for (Level& level : levels_) {
    for (auto& layer : level.steps) {
      const auto [y, ld] = layer->forward(tape, h);
      h = y;
      total = ad::add(total, ld);
    }
    if (level.split) {
      const Split::Forward f = level.split->forward(tape, h);
      out.splits.push_back(f.z.value());
      h = f.kept;
    }
  }
  out.top = h.value();
  if (logdet) logdet->assign(total.value().data().begin(), total.value().data().end());
  return out;
}

template <class DrawSplit>
Tensor4 FlowModel::decode_with(Tensor4 h, DrawSplit draw) {
  for (std::size_t l = levels_.size(); l-- > 0;) {
    Level& level = levels_[l];
    if (level.split) h = level.split->inverse(h, draw(l, *level.split, h));
    for (std::size_t k = level.steps.size(); k-- > 0;) h = level.steps[k]->inverse(h).y;
  }
  return h;
}

Tensor4 FlowModel::decode(const Latents& z) {
  const std::size_t expected = levels_.empty() ? 0 : levels_.size() - 1;
  if (z.splits.size() != expected) {
    throw std::invalid_argument("decode: expected " + std::to_string(expected) + " split latents, got " +
                                std::to_string(z.splits.size()));
  }
  const Shape4 top{z.top.n(), top_shape_.c, top_shape_.h, top_shape_.w};
  if (z.top.shape() != top) throw std::invalid_argument("decode: top latent has shape " + to_string(z.top.shape()));
  return decode_with(z.top, [&](std::size_t l, Split&, const Tensor4&) { return z.splits[l]; });
}

Tensor4 FlowModel::sample(std::size_t n, double temperature, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Tensor4 top({n, top_shape_.c, top_shape_.h, top_shape_.w});
  for (auto& v : top.data()) v = temperature * nd(rng);
  return decode_with(std::move(top), [&](std::size_t, Split& s, const Tensor4& kept) {
    return s.sample(kept, temperature, rng);
  });
}

std::vector<Layer*> FlowModel::layers() {
  std::vector<Layer*> out;
  for (Level& level : levels_)
    for (auto& layer : level.steps) out.push_back(layer.get());
  return out;
}

std::vector<Split*> FlowModel::splits() {
  std::vector<Split*> out;
  for (Level& level : levels_)
    if (level.split) out.push_back(level.split.get());
  return out;
}

std::vector<Parameter*> FlowModel::parameters() {
  std::vector<Parameter*> out;
  for (Level& level : levels_) {
    for (auto& layer : level.steps)
      for (Parameter* p : layer->parameters()) out.push_back(p);
    if (level.split)
      for (Parameter* p : level.split->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> FlowModel::trainable_parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : parameters())
    if (p->trainable) out.push_back(p);
  return out;
}

std::size_t FlowModel::trainable_size() {
  std::size_t total = 0;
  for (Parameter* p : trainable_parameters()) total += p->value.size();
  return total;
}

Parameter* FlowModel::find(const std::string& name) {
  for (Parameter* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

}  // namespace flowforge
