#include "wrecon/model.hpp"

#include <cmath>
#include <stdexcept>

namespace wrecon {

void WCNNConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("WCNNConfig: levels must be >= 1");
  if (levels > 8) throw std::invalid_argument("WCNNConfig: levels must be <= 8");
  if (block_depth < 1) throw std::invalid_argument("WCNNConfig: block_depth must be >= 1");
  if (base_channels < 1) throw std::invalid_argument("WCNNConfig: base_channels must be >= 1");
  if (input_channels < 1) throw std::invalid_argument("WCNNConfig: input_channels must be >= 1");
}

void CascadeConfig::validate() const {
  if (n_cascades < 1) throw std::invalid_argument("CascadeConfig: n_cascades must be >= 1");
  if (!(fidelity.lambda >= 0.0)) throw std::invalid_argument("CascadeConfig: lambda must be >= 0");
}

Conv2dLayer::Conv2dLayer(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng) {
  Tensor w({out, in, 3, 3});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
  for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  weight = Parameter(name + ".weight", std::move(w));
  if (with_bias) bias.emplace(name + ".bias", Tensor::zeros({out}));
}

Var Conv2dLayer::forward(const Var& x) const { return conv2d(x, weight.node, bias ? bias->node : nullptr); }

ConvBnRelu::ConvBnRelu(const std::string& name_, std::size_t in, std::size_t out, Rng& rng)
    : name(name_),
      conv(name_ + ".conv", in, out, false, rng),
      gamma(name_ + ".bn.gamma", Tensor::ones({out})),
      beta(name_ + ".bn.beta", Tensor::zeros({out})),
      stats(out) {}

Var ConvBnRelu::forward(const Var& x, Mode mode) {
  return relu(batchnorm2d(conv.forward(x), gamma.node, beta.node, stats, mode));
}

FCBlock::FCBlock(const std::string& name, std::size_t in, std::size_t mid, std::size_t out, std::size_t depth,
                 Rng& rng) {
  layers.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t cin = i == 0 ? in : mid;
    const std::size_t cout = i + 1 == depth ? out : mid;
    layers.emplace_back(name + "." + std::to_string(i), cin, cout, rng);
  }
}

Var FCBlock::forward(Var x, Mode mode) {
  for (auto& l : layers) x = l.forward(x, mode);
  return x;
}

WCNN::WCNN(const WCNNConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t L = cfg_.levels, d = cfg_.block_depth;
  // Contracting path: level l runs at width c_l; each Haar level stacks
  // four subbands, so the next block sees 4*c_l channels.
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = l == 0 ? cfg_.input_channels : 4 * cfg_.width(l - 1);
    encoders_.emplace_back("enc" + std::to_string(l), in, cfg_.width(l), cfg_.width(l), d, rng);
  }
  bottleneck_ = FCBlock("mid", 4 * cfg_.width(L - 1), cfg_.width(L), 4 * cfg_.width(L - 1), d, rng);
  // Expanding path: block l must emit 4*c_{l-1} channels for the next
  // inverse transform to land on the level-(l-1) tap width.
  decoders_.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t out = l == 0 ? cfg_.width(0) : 4 * cfg_.width(l - 1);
    decoders_[l] = FCBlock("dec" + std::to_string(l), cfg_.width(l), cfg_.width(l), out, d, rng);
  }
  final_ = Conv2dLayer("final", cfg_.width(0), cfg_.input_channels, true, rng);
  // Start as the identity map; the residual branch grows from zero.
  zero_residual();
}

Var WCNN::forward(const Var& x, Mode mode) {
  const Tensor& xv = x->value;
  require_rank(xv, 4, "WCNN input");
  if (xv.dim(1) != cfg_.input_channels) {
    throw ShapeError("WCNN: expected " + std::to_string(cfg_.input_channels) + " input channels, got " +
                     to_string(xv.shape()));
  }
  if (xv.dim(2) % cfg_.divisor() != 0 || xv.dim(3) % cfg_.divisor() != 0) {
    throw ShapeError("WCNN: spatial extents " + to_string(xv.shape()) + " must be divisible by " +
                     std::to_string(cfg_.divisor()));
  }
  std::vector<Var> taps;
  Var h = x;
  for (auto& enc : encoders_) {
    h = enc.forward(h, mode);
    taps.push_back(h);
    h = dwt_layer(h);
  }
  h = bottleneck_.forward(h, mode);
  for (std::size_t l = cfg_.levels; l-- > 0;) {
    h = add(iwt_layer(h), taps[l]);
    h = decoders_[l].forward(h, mode);
  }
  return add(x, final_.forward(h));
}

Tensor WCNN::predict(const Tensor& x) {
  NoGradGuard guard;
  if (x.rank() == 2) {
    const Tensor in = x.reshaped({1, 1, x.dim(0), x.dim(1)});
    return forward(constant(in), Mode::Eval)->value.reshaped(x.shape());
  }
  return forward(constant(x), Mode::Eval)->value;
}

std::vector<Parameter*> WCNN::parameters() {
  std::vector<Parameter*> out;
  auto block = [&](FCBlock& b) {
    for (auto& l : b.layers) {
      out.push_back(&l.conv.weight);
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  };
  for (auto& e : encoders_) block(e);
  block(bottleneck_);
  for (std::size_t l = cfg_.levels; l-- > 0;) block(decoders_[l]);
  out.push_back(&final_.weight);
  out.push_back(&*final_.bias);
  return out;
}

std::vector<NamedTensor> WCNN::buffers() {
  std::vector<NamedTensor> out;
  auto block = [&](FCBlock& b) {
    for (auto& l : b.layers) {
      out.emplace_back(l.name + ".bn.running_mean", &l.stats.running_mean);
      out.emplace_back(l.name + ".bn.running_var", &l.stats.running_var);
    }
  };
  for (auto& e : encoders_) block(e);
  block(bottleneck_);
  for (std::size_t l = cfg_.levels; l-- > 0;) block(decoders_[l]);
  return out;
}

std::size_t WCNN::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value().size();
  return n;
}

void WCNN::zero_residual() {
  final_.weight.value().fill(0.0f);
  final_.bias->value().fill(0.0f);
}

DCWCNN::DCWCNN(const WCNNConfig& wcnn, const CascadeConfig& cascade, std::uint64_t seed) : cascade_(cascade) {
  cascade_.validate();
  const std::size_t n = cascade_.share_weights ? 1 : cascade_.n_cascades;
  for (std::size_t i = 0; i < n; ++i) blocks_.emplace_back(wcnn, hash_combine(seed, i));
}

DCWCNN::DCWCNN(std::vector<WCNN> blocks, const CascadeConfig& cascade)
    : blocks_(std::move(blocks)), cascade_(cascade) {
  cascade_.validate();
  const std::size_t expected = cascade_.share_weights ? 1 : cascade_.n_cascades;
  if (blocks_.size() != expected) {
    throw std::invalid_argument("DCWCNN: expected " + std::to_string(expected) + " blocks, got " +
                                std::to_string(blocks_.size()));
  }
  for (const auto& b : blocks_) {
    if (!(b.config() == blocks_.front().config())) throw std::invalid_argument("DCWCNN: block configs differ");
  }
}

Var DCWCNN::forward(const Var& x_u, std::span<const ComplexGrid> ys, const SamplingMask& mask, Mode mode) {
  Var x = x_u;
  for (std::size_t n = 0; n < cascade_.n_cascades; ++n) {
    x = block_for_stage(n).forward(x, mode);
    x = data_fidelity_layer(x, ys, mask, cascade_.fidelity);
  }
  return x;
}

std::vector<Parameter*> DCWCNN::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : blocks_) {
    auto p = b.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<NamedTensor> DCWCNN::buffers() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    for (auto& [name, t] : blocks_[i].buffers()) out.emplace_back("block" + std::to_string(i) + "." + name, t);
  }
  return out;
}

Tensor dcwcnn_forward(std::span<WCNN> models, const ComplexGrid& y, const SamplingMask& mask,
                      const CascadeConfig& cfg) {
  cfg.validate();
  const std::size_t expected = cfg.share_weights ? 1 : cfg.n_cascades;
  if (models.size() != expected) {
    throw std::invalid_argument("dcwcnn_forward: expected " + std::to_string(expected) + " models, got " +
                                std::to_string(models.size()));
  }
  Tensor x = zero_filled(y, mask).real_part();
  for (std::size_t n = 0; n < cfg.n_cascades; ++n) {
    x = models[cfg.share_weights ? 0 : n].predict(x);
    x = data_fidelity(x, y, mask, cfg.fidelity);
  }
  return x.reshaped({1, 1, x.dim(0), x.dim(1)});
}

}  // namespace wrecon
