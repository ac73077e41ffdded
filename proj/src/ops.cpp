#include "wrecon/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "wrecon/parallel.hpp"

namespace wrecon {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Column buffer layout: row (ci*9 + ky*3 + kx), column (y*W + x).
void im2col(const float* x, std::size_t channels, std::size_t h, std::size_t w, float* cols) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const float* plane = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* row = cols + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          float* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(dst, dst + w, 0.0f);
            continue;
          }
          const float* src = plane + sy * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long sx = static_cast<long>(xx) + kx - 1;
            dst[xx] = (sx < 0 || sx >= static_cast<long>(w)) ? 0.0f : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, std::size_t channels, std::size_t h, std::size_t w, float* x) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    float* plane = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* row = cols + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const float* src = row + y * w;
          float* dst = plane + sy * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long sx = static_cast<long>(xx) + kx - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) dst[sx] += src[xx];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x->value;
  const Tensor& wv = weight->value;
  require_rank(xv, 4, "conv2d input");
  require_rank(wv, 4, "conv2d weight");
  if (wv.dim(2) != 3 || wv.dim(3) != 3) {
    throw ShapeError("conv2d: kernel must be 3x3, got " + to_string(wv.shape()));
  }
  const std::size_t n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const std::size_t cout = wv.dim(0);
  if (wv.dim(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels but weight expects " +
                     std::to_string(wv.dim(1)));
  }
  if (bias && (bias->value.rank() != 1 || bias->value.dim(0) != cout)) {
    throw ShapeError("conv2d: bias shape " + to_string(bias->value.shape()) + " does not match " +
                     std::to_string(cout) + " output channels");
  }

  const std::size_t hw = h * w, k = cin * 9;
  Tensor out({n, cout, h, w});
  {
    const float* xp = xv.raw();
    const float* wp = wv.raw();
    const float* bp = bias ? bias->value.raw() : nullptr;
    float* op = out.raw();
#pragma omp parallel num_threads(thread_count())
    {
      std::vector<float> cols(k * hw);
#pragma omp for schedule(static)
      for (long s = 0; s < static_cast<long>(n); ++s) {
        im2col(xp + s * cin * hw, cin, h, w, cols.data());
        MapMat o(op + s * cout * hw, cout, hw);
        o.noalias() = ConstMapMat(wp, cout, k) * ConstMapMat(cols.data(), k, hw);
        if (bp) {
          for (std::size_t c = 0; c < cout; ++c) o.row(c).array() += bp[c];
        }
      }
    }
  }

  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_node(std::move(out), "conv2d", std::move(parents), [=](Node& self) {
    const Tensor& xv = x->value;
    const Tensor& wv = weight->value;
    const float* gp = self.grad.raw();
    const bool need_x = x->requires_grad;
    const bool need_w = weight->requires_grad;
    const bool need_b = bias && bias->requires_grad;

    Tensor dx = need_x ? Tensor::zeros(xv.shape()) : Tensor();
    std::vector<float> dw_parts(need_w ? n * cout * k : 0);
    std::vector<double> db_parts(need_b ? n * cout : 0);

#pragma omp parallel num_threads(thread_count())
    {
      std::vector<float> cols(k * hw);
#pragma omp for schedule(static)
      for (long s = 0; s < static_cast<long>(n); ++s) {
        ConstMapMat g(gp + s * cout * hw, cout, hw);
        if (need_w) {
          im2col(xv.raw() + s * cin * hw, cin, h, w, cols.data());
          MapMat dw(dw_parts.data() + s * cout * k, cout, k);
          dw.noalias() = g * ConstMapMat(cols.data(), k, hw).transpose();
        }
        if (need_x) {
          MapMat dcols(cols.data(), k, hw);
          dcols.noalias() = ConstMapMat(wv.raw(), cout, k).transpose() * g;
          col2im_add(cols.data(), cin, h, w, dx.raw() + s * cin * hw);
        }
        if (need_b) {
          for (std::size_t c = 0; c < cout; ++c) {
            double acc = 0.0;
            const float* row = gp + (s * cout + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) acc += row[i];
            db_parts[s * cout + c] = acc;
          }
        }
      }
    }

    // Per-sample partials are reduced in sample order so the result does
    // not depend on the worker count.
    if (need_x) x->accumulate(dx);
    if (need_w) {
      Tensor dw(wv.shape());
      float* d = dw.raw();
      for (std::size_t s = 0; s < n; ++s) {
        const float* part = dw_parts.data() + s * cout * k;
        for (std::size_t i = 0; i < cout * k; ++i) d[i] += part[i];
      }
      weight->accumulate(dw);
    }
    if (need_b) {
      Tensor db({cout});
      for (std::size_t c = 0; c < cout; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s) acc += db_parts[s * cout + c];
        db[c] = static_cast<float>(acc);
      }
      bias->accumulate(db);
    }
  });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, Mode mode,
                float eps, float momentum) {
  const Tensor& xv = x->value;
  require_rank(xv, 4, "batchnorm2d input");
  const std::size_t n = xv.dim(0), ch = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  const std::size_t count = n * hw;
  if (gamma->value.shape() != Shape{ch} || beta->value.shape() != Shape{ch}) {
    throw ShapeError("batchnorm2d: gamma/beta must have shape [" + std::to_string(ch) + "]");
  }
  if (stats.running_mean.shape() != Shape{ch} || stats.running_var.shape() != Shape{ch}) {
    throw ShapeError("batchnorm2d: running statistics do not match channel count");
  }

  std::vector<float> mean(ch), invstd(ch);
  if (mode == Mode::Train) {
    if (count < 2) throw ShapeError("batchnorm2d: train mode needs at least 2 values per channel");
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const float* p = xv.raw() + (b * ch + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const float* p = xv.raw() + (b * ch + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = p[i] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = static_cast<float>(mu);
      invstd[c] = static_cast<float>(1.0 / std::sqrt(var + eps));
      const double unbiased = ss / static_cast<double>(count - 1);
      stats.running_mean[c] = static_cast<float>((1.0 - momentum) * stats.running_mean[c] + momentum * mu);
      stats.running_var[c] = static_cast<float>((1.0 - momentum) * stats.running_var[c] + momentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = stats.running_mean[c];
      invstd[c] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(stats.running_var[c]) + eps));
    }
  }

  Tensor out(xv.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const float* p = xv.raw() + (b * ch + c) * hw;
      float* o = out.raw() + (b * ch + c) * hw;
      const float g = gamma->value[c], bt = beta->value[c], mu = mean[c], is = invstd[c];
      for (std::size_t i = 0; i < hw; ++i) o[i] = g * ((p[i] - mu) * is) + bt;
    }
  }

  return make_node(std::move(out), "batchnorm2d", {x, gamma, beta},
                   [=, mean = std::move(mean), invstd = std::move(invstd)](Node& self) {
    const Tensor& xv = x->value;
    const float* gp = self.grad.raw();
    Tensor dx = x->requires_grad ? Tensor::zeros(xv.shape()) : Tensor();
    Tensor dgamma({ch}), dbeta({ch});
    for (std::size_t c = 0; c < ch; ++c) {
      const float mu = mean[c], is = invstd[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const float* p = xv.raw() + (b * ch + c) * hw;
        const float* g = gp + (b * ch + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += g[i];
          sum_dy_xhat += static_cast<double>(g[i]) * ((p[i] - mu) * is);
        }
      }
      dgamma[c] = static_cast<float>(sum_dy_xhat);
      dbeta[c] = static_cast<float>(sum_dy);
      if (!x->requires_grad) continue;
      const float gam = gamma->value[c];
      if (mode == Mode::Train) {
        // dx = gamma*invstd/M * (M*dy - sum(dy) - xhat*sum(dy*xhat))
        const double m = static_cast<double>(count);
        const double k = gam * is / m;
        for (std::size_t b = 0; b < n; ++b) {
          const float* p = xv.raw() + (b * ch + c) * hw;
          const float* g = gp + (b * ch + c) * hw;
          float* d = dx.raw() + (b * ch + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            const double xhat = (p[i] - mu) * is;
            d[i] = static_cast<float>(k * (m * g[i] - sum_dy - xhat * sum_dy_xhat));
          }
        }
      } else {
        const float k = gam * is;
        for (std::size_t b = 0; b < n; ++b) {
          const float* g = gp + (b * ch + c) * hw;
          float* d = dx.raw() + (b * ch + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) d[i] = k * g[i];
        }
      }
    }
    if (x->requires_grad) x->accumulate(dx);
    gamma->accumulate(dgamma);
    beta->accumulate(dbeta);
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (auto& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return make_node(std::move(out), "relu", {x}, [x](Node& self) {
    Tensor dx(x->value.shape());
    const float* xv = x->value.raw();
    const float* g = self.grad.raw();
    float* d = dx.raw();
    for (std::size_t i = 0; i < dx.size(); ++i) d[i] = xv[i] > 0.0f ? g[i] : 0.0f;
    x->accumulate(dx);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  return make_node(a->value + b->value, "add", {a, b}, [a, b](Node& self) {
    a->accumulate(self.grad);
    b->accumulate(self.grad);
  });
}

Var square(const Var& x) {
  Tensor out = x->value;
  for (auto& v : out.data()) v = v * v;
  return make_node(std::move(out), "square", {x}, [x](Node& self) {
    Tensor dx(x->value.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = 2.0f * x->value[i] * self.grad[i];
    x->accumulate(dx);
  });
}

Var sum(const Var& x) {
  Tensor out({1}, static_cast<float>(x->value.sum()));
  return make_node(std::move(out), "sum", {x}, [x](Node& self) {
    x->accumulate(Tensor(x->value.shape(), self.grad[0]));
  });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  require_same_shape(x->value, weights, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += static_cast<double>(weights[i]) * x->value[i];
  return make_node(Tensor({1}, static_cast<float>(s)), "weighted_sum", {x}, [x, weights](Node& self) {
    x->accumulate(weights * self.grad[0]);
  });
}

Var mse_loss(const Var& pred, const Tensor& target) {
  require_same_shape(pred->value, target, "mse_loss");
  const std::size_t batch = pred->value.rank() ? pred->value.dim(0) : 1;
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = static_cast<double>(pred->value[i]) - target[i];
    s += d * d;
  }
  s /= static_cast<double>(batch);
  return make_node(Tensor({1}, static_cast<float>(s)), "mse_loss", {pred}, [pred, target, batch](Node& self) {
    Tensor d(pred->value.shape());
    const float k = 2.0f * self.grad[0] / static_cast<float>(batch);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = k * (pred->value[i] - target[i]);
    pred->accumulate(d);
  });
}

}  // namespace wrecon
