#include "wrecon/optim.hpp"

#include <cmath>

namespace wrecon {

Parameter::Parameter(std::string name_, Tensor init)
    : name(std::move(name_)),
      node(variable(std::move(init))),
      m(Tensor::zeros_like(node->value)),
      v(Tensor::zeros_like(node->value)) {}

Parameter::Parameter(const Parameter& other)
    : name(other.name),
      node(other.node ? variable(other.node->value) : nullptr),
      m(other.m),
      v(other.v),
      step(other.step) {}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) *this = Parameter(other);
  return *this;
}

void adam_step(std::span<Parameter* const> params, const AdamConfig& cfg) {
  for (Parameter* p : params) {
    ++p->step;
    const double t = static_cast<double>(p->step);
    const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta1), t));
    const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta2), t));
    float* w = p->value().raw();
    const float* g = p->grad().raw();
    float* m = p->m.raw();
    float* v = p->v.raw();
    for (std::size_t i = 0; i < p->value().size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const float mhat = m[i] / c1;
      const float vhat = v[i] / c2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p->node->zero_grad();
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->node->zero_grad();
}

}  // namespace wrecon
