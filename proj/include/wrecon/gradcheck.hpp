#pragma once

#include <cstddef>
#include <functional>

#include "wrecon/tensor.hpp"

namespace wrecon {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h = 1e-3);

struct GradCompare {
  std::size_t count = 0;
  std::size_t within_tol = 0;  // elements with rel. error <= tol
  double max_rel = 0.0;
  std::size_t worst_index = 0;
  double fraction() const { return count ? static_cast<double>(within_tol) / count : 1.0; }
};

/// Elementwise |a - b| / max(|a|, |b|, floor).
GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric, double tol,
                              double floor = 1e-6);

}  // namespace wrecon
