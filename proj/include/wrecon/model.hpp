#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wrecon/autodiff.hpp"
#include "wrecon/kspace.hpp"
#include "wrecon/ops.hpp"
#include "wrecon/optim.hpp"
#include "wrecon/rng.hpp"
#include "wrecon/wavelet.hpp"

namespace wrecon {

struct WCNNConfig {
  std::size_t levels = 3;          // Haar decompositions on the contracting path
  std::size_t block_depth = 4;     // conv-BN-ReLU layers per block
  std::size_t base_channels = 16;  // width at full resolution; doubles per level
  std::size_t input_channels = 1;

  void validate() const;
  std::size_t width(std::size_t level) const { return base_channels << level; }
  /// Spatial extents must be multiples of this.
  std::size_t divisor() const { return std::size_t{1} << levels; }
  bool operator==(const WCNNConfig&) const = default;
};

struct CascadeConfig {
  std::size_t n_cascades = 2;
  FidelityConfig fidelity;
  bool share_weights = false;

  void validate() const;
};

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  Var forward(const Var& x) const;

  Parameter weight;
  std::optional<Parameter> bias;
};

/// conv3x3 -> batch norm -> ReLU. The convolution carries no bias since
/// the batch norm shift subsumes it.
struct ConvBnRelu {
  ConvBnRelu(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(const Var& x, Mode mode);

  std::string name;
  Conv2dLayer conv;
  Parameter gamma;
  Parameter beta;
  BatchNormStats stats;
};

class FCBlock {
 public:
  FCBlock() = default;
  FCBlock(const std::string& name, std::size_t in, std::size_t mid, std::size_t out, std::size_t depth, Rng& rng);

  Var forward(Var x, Mode mode);

  std::vector<ConvBnRelu> layers;
};

using NamedTensor = std::pair<std::string, Tensor*>;

/// Shared surface of the standalone and cascaded reconstructors.
class Network {
 public:
  virtual ~Network() = default;

  /// x_u: [N,1,H,W] zero-filled inputs; ys/mask are the matching measurements.
  virtual Var forward(const Var& x_u, std::span<const ComplexGrid> ys, const SamplingMask& mask, Mode mode) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  /// Non-trainable state (batch-norm running statistics).
  virtual std::vector<NamedTensor> buffers() = 0;
};

/// Wavelet encoder-decoder with a global residual: returns x + branch(x).
class WCNN : public Network {
 public:
  WCNN(const WCNNConfig& cfg, std::uint64_t seed);

  Var forward(const Var& x, Mode mode);
  Var forward(const Var& x_u, std::span<const ComplexGrid>, const SamplingMask&, Mode mode) override {
    return forward(x_u, mode);
  }
  /// Eval-mode forward without recording a graph. Accepts [H,W] or [N,1,H,W].
  Tensor predict(const Tensor& x);

  std::vector<Parameter*> parameters() override;
  std::vector<NamedTensor> buffers() override;
  const WCNNConfig& config() const { return cfg_; }
  std::size_t parameter_count();

  /// Zeroes the last convolution so the block is exactly the identity map.
  void zero_residual();

 private:
  WCNNConfig cfg_;
  std::vector<FCBlock> encoders_;
  FCBlock bottleneck_;
  std::vector<FCBlock> decoders_;  // decoders_[l] runs at level l
  Conv2dLayer final_;
};

/// Alternating WCNN blocks and data-fidelity units; the output of the last
/// fidelity unit is the reconstruction.
class DCWCNN : public Network {
 public:
  DCWCNN(const WCNNConfig& wcnn, const CascadeConfig& cascade, std::uint64_t seed);
  DCWCNN(std::vector<WCNN> blocks, const CascadeConfig& cascade);

  Var forward(const Var& x_u, std::span<const ComplexGrid> ys, const SamplingMask& mask, Mode mode) override;
  std::vector<Parameter*> parameters() override;
  std::vector<NamedTensor> buffers() override;

  const CascadeConfig& cascade() const { return cascade_; }
  const WCNNConfig& wcnn_config() const { return blocks_.front().config(); }
  std::vector<WCNN>& blocks() { return blocks_; }
  WCNN& block_for_stage(std::size_t stage) { return blocks_[cascade_.share_weights ? 0 : stage]; }

 private:
  std::vector<WCNN> blocks_;
  CascadeConfig cascade_;
};

/// Single-image cascade reconstruction from measurements: x0 = Re(zero_filled(y)),
/// then x_n = DF(WCNN_n(x_{n-1})) for each stage. Eval mode.
Tensor dcwcnn_forward(std::span<WCNN> models, const ComplexGrid& y, const SamplingMask& mask,
                      const CascadeConfig& cfg);

}  // namespace wrecon
