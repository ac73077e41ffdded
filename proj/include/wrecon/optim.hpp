#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "wrecon/autodiff.hpp"

namespace wrecon {

/// Trainable tensor plus its Adam moment estimates.
struct Parameter {
  std::string name;
  Var node;
  Tensor m;
  Tensor v;
  std::int64_t step = 0;

  Parameter() = default;
  Parameter(std::string name, Tensor init);
  // Copies get a fresh graph leaf: values and moments are duplicated, never shared.
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  Tensor& value() { return node->value; }
  const Tensor& value() const { return node->value; }
  Tensor& grad() { return node->grad; }
  const Tensor& grad() const { return node->grad; }
};

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Bias-corrected Adam update, then zeroes every gradient.
void adam_step(std::span<Parameter* const> params, const AdamConfig& cfg);

void zero_grad(std::span<Parameter* const> params);

}  // namespace wrecon
