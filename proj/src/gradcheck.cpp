#include "wrecon/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace wrecon {

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h) {
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float orig = x[i];
    probe[i] = static_cast<float>(orig + h);
    const double up = f(probe);
    const double hi = static_cast<double>(probe[i]);
    probe[i] = static_cast<float>(orig - h);
    const double down = f(probe);
    const double lo = static_cast<double>(probe[i]);
    probe[i] = orig;
    // Divide by the step actually representable in float.
    grad[i] = static_cast<float>((up - down) / (hi - lo));
  }
  return grad;
}

GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric, double tol,
                              double floor) {
  require_same_shape(analytic, numeric, "compare_gradients");
  GradCompare r;
  r.count = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    const double rel = std::abs(a - n) / denom;
    if (rel <= tol) ++r.within_tol;
    if (rel > r.max_rel) {
      r.max_rel = rel;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace wrecon
