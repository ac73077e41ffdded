#pragma once

#include <functional>
#include <vector>

#include "wrecon/autodiff.hpp"
#include "wrecon/gradcheck.hpp"
#include "wrecon/ops.hpp"
#include "wrecon/rng.hpp"
#include "wrecon/tensor.hpp"

namespace wrecon::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline double weighted_value(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out[i]) * w[i];
  return s;
}

using Builder = std::function<Var(const std::vector<Var>&)>;

/// Gradient of sum(w * build(inputs)) w.r.t. inputs[which], analytic vs
/// central differences.
inline GradCompare check_grad(const Builder& build, const std::vector<Tensor>& inputs, std::size_t which,
                              std::uint64_t seed, double tol = 1e-2, double h = 1e-3) {
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(variable(t));
  Var out = build(vars);
  const Tensor w = random_tensor(out->value.shape(), seed ^ 0xabcdefULL);
  backward(weighted_sum(out, w));
  const Tensor analytic = vars[which]->grad;

  auto f = [&](const Tensor& x) {
    NoGradGuard guard;
    std::vector<Var> cs;
    for (std::size_t i = 0; i < inputs.size(); ++i) cs.push_back(constant(i == which ? x : inputs[i]));
    return weighted_value(build(cs)->value, w);
  };
  const Tensor numeric = finite_difference_grad(f, inputs[which], h);
  return compare_gradients(analytic, numeric, tol);
}

}  // namespace wrecon::testing
