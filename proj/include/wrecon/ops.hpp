#pragma once

#include "wrecon/autodiff.hpp"

namespace wrecon {

/// 3x3 convolution, stride 1, one pixel of zero padding.
/// x: [N,Cin,H,W], weight: [Cout,Cin,3,3], bias: [Cout] or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias);

/// Per-channel running statistics owned by a batch-norm layer.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels ? Tensor::zeros({channels}) : Tensor()),
        running_var(channels ? Tensor::ones({channels}) : Tensor()) {}
};

inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.1f;

/// Train mode normalizes with batch statistics over (N,H,W) and updates
/// `stats`; eval mode normalizes with `stats`.
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, Mode mode,
                float eps = kBatchNormEps, float momentum = kBatchNormMomentum);

/// max(0, x); the derivative at exactly 0 is taken as 0.
Var relu(const Var& x);

Var add(const Var& a, const Var& b);

/// Elementwise x*x.
Var square(const Var& x);

/// Scalar sum of all elements.
Var sum(const Var& x);

/// Scalar sum of weights[i] * x[i]; weights are a constant.
Var weighted_sum(const Var& x, const Tensor& weights);

/// Mean over the leading (batch) axis of per-sample squared L2 norms.
Var mse_loss(const Var& pred, const Tensor& target);

}  // namespace wrecon
