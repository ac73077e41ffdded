#include "wrecon/wavelet.hpp"

namespace wrecon {
namespace {

void require_even(const Tensor& x, const char* what) {
  require_rank(x, 4, what);
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError(std::string(what) + ": spatial extents must be even, got " + to_string(x.shape()));
  }
}

// The four band planes of channel c live at channel offsets band*C + c of a
// stacked [N,4C,H/2,W/2] tensor, or in four separate tensors when split.
void analyze(const Tensor& x, float* ll, float* lh, float* hl, float* hh, std::size_t sample_stride) {
  const std::size_t n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const float* src = x.raw() + (b * ch + c) * h * w;
      const std::size_t off = b * sample_stride + c * oh * ow;
      for (std::size_t i = 0; i < oh; ++i) {
        const float* r0 = src + (2 * i) * w;
        const float* r1 = r0 + w;
        for (std::size_t j = 0; j < ow; ++j) {
          const float a = r0[2 * j], bb = r0[2 * j + 1], cc = r1[2 * j], d = r1[2 * j + 1];
          const std::size_t o = off + i * ow + j;
          ll[o] = 0.5f * (a + bb + cc + d);
          lh[o] = 0.5f * (a + bb - cc - d);
          hl[o] = 0.5f * (a - bb + cc - d);
          hh[o] = 0.5f * (a - bb - cc + d);
        }
      }
    }
  }
}

void synthesize(const float* ll, const float* lh, const float* hl, const float* hh, std::size_t n,
                std::size_t ch, std::size_t oh, std::size_t ow, std::size_t sample_stride, Tensor& out) {
  const std::size_t h = 2 * oh, w = 2 * ow;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      float* dst = out.raw() + (b * ch + c) * h * w;
      const std::size_t off = b * sample_stride + c * oh * ow;
      for (std::size_t i = 0; i < oh; ++i) {
        float* r0 = dst + (2 * i) * w;
        float* r1 = r0 + w;
        for (std::size_t j = 0; j < ow; ++j) {
          const std::size_t o = off + i * ow + j;
          const float s0 = ll[o], s1 = lh[o], s2 = hl[o], s3 = hh[o];
          r0[2 * j] = 0.5f * (s0 + s1 + s2 + s3);
          r0[2 * j + 1] = 0.5f * (s0 + s1 - s2 - s3);
          r1[2 * j] = 0.5f * (s0 - s1 + s2 - s3);
          r1[2 * j + 1] = 0.5f * (s0 - s1 - s2 + s3);
        }
      }
    }
  }
}

}  // namespace

SubbandSet dwt2_haar(const Tensor& x) {
  require_even(x, "dwt2_haar");
  const Shape bs{x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2};
  SubbandSet s{Tensor(bs), Tensor(bs), Tensor(bs), Tensor(bs)};
  const std::size_t per_sample = x.dim(1) * bs[2] * bs[3];
  analyze(x, s.ll.raw(), s.lh.raw(), s.hl.raw(), s.hh.raw(), per_sample);
  return s;
}

Tensor iwt2_haar(const SubbandSet& s) {
  require_rank(s.ll, 4, "iwt2_haar");
  require_same_shape(s.ll, s.lh, "iwt2_haar");
  require_same_shape(s.ll, s.hl, "iwt2_haar");
  require_same_shape(s.ll, s.hh, "iwt2_haar");
  const std::size_t n = s.ll.dim(0), ch = s.ll.dim(1), oh = s.ll.dim(2), ow = s.ll.dim(3);
  Tensor out({n, ch, 2 * oh, 2 * ow});
  synthesize(s.ll.raw(), s.lh.raw(), s.hl.raw(), s.hh.raw(), n, ch, oh, ow, ch * oh * ow, out);
  return out;
}

Tensor dwt_stacked(const Tensor& x) {
  require_even(x, "dwt_layer");
  const std::size_t n = x.dim(0), ch = x.dim(1), oh = x.dim(2) / 2, ow = x.dim(3) / 2;
  Tensor out({n, 4 * ch, oh, ow});
  const std::size_t band = ch * oh * ow;
  float* base = out.raw();
  analyze(x, base, base + band, base + 2 * band, base + 3 * band, 4 * band);
  return out;
}

Tensor iwt_stacked(const Tensor& x) {
  require_rank(x, 4, "iwt_layer");
  if (x.dim(1) % 4 != 0) {
    throw ShapeError("iwt_layer: channel count must be divisible by 4, got " + to_string(x.shape()));
  }
  const std::size_t n = x.dim(0), ch = x.dim(1) / 4, oh = x.dim(2), ow = x.dim(3);
  Tensor out({n, ch, 2 * oh, 2 * ow});
  const std::size_t band = ch * oh * ow;
  const float* base = x.raw();
  synthesize(base, base + band, base + 2 * band, base + 3 * band, n, ch, oh, ow, 4 * band, out);
  return out;
}

// Both maps are orthonormal, so each one's backward is the other.
Var dwt_layer(const Var& x) {
  return make_node(dwt_stacked(x->value), "dwt", {x},
                   [x](Node& self) { x->accumulate(iwt_stacked(self.grad)); });
}

Var iwt_layer(const Var& x) {
  return make_node(iwt_stacked(x->value), "iwt", {x},
                   [x](Node& self) { x->accumulate(dwt_stacked(self.grad)); });
}

}  // namespace wrecon
