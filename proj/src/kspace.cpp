#include "wrecon/kspace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "wrecon/io_util.hpp"
#include "wrecon/rng.hpp"

namespace wrecon {
namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

// Unnormalized 1-D DFT with sign -1 (forward) or +1 (inverse), in place.
void dft1d(std::vector<cd>& a, int sign) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (is_pow2(n)) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const cd wk = std::polar(1.0, ang * static_cast<double>(k));
          const cd u = a[i + k];
          const cd v = a[i + k + len / 2] * wk;
          a[i + k] = u + v;
          a[i + k + len / 2] = u - v;
        }
      }
    }
    return;
  }
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
      acc += a[j] * std::polar(1.0, ang);
    }
    out[k] = acc;
  }
  a = std::move(out);
}

// Centered transform: ifftshift, DFT, fftshift, scale by 1/sqrt(HW).
ComplexGrid centered_transform(const ComplexGrid& in, int sign) {
  const std::size_t h = in.height, w = in.width;
  const std::size_t ch = h / 2, cw = w / 2;
  std::vector<cd> buf(h * w);
  // ifftshift: out[i] = in[(i + floor(n/2)) mod n]
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t sr = (r + ch) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t sc = (c + cw) % w;
      buf[r * w + c] = cd(in.re[sr * w + sc], in.im[sr * w + sc]);
    }
  }
  std::vector<cd> line(w);
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(buf.begin() + static_cast<long>(r * w), w, line.begin());
    dft1d(line, sign);
    std::copy(line.begin(), line.end(), buf.begin() + static_cast<long>(r * w));
  }
  line.resize(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) line[r] = buf[r * w + c];
    dft1d(line, sign);
    for (std::size_t r = 0; r < h; ++r) buf[r * w + c] = line[r];
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  ComplexGrid out(h, w);
  // fftshift: out[(i + floor(n/2)) mod n] = in[i]
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t dr = (r + ch) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t dc = (c + cw) % w;
      const cd v = buf[r * w + c] * scale;
      out.re[dr * w + dc] = static_cast<float>(v.real());
      out.im[dr * w + dc] = static_cast<float>(v.imag());
    }
  }
  return out;
}

void require_mask_fits(std::size_t h, const SamplingMask& m, const char* what) {
  if (m.height != h || m.rows.size() != h) {
    throw ShapeError(std::string(what) + ": mask height " + std::to_string(m.height) +
                     " does not match grid height " + std::to_string(h));
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

// One sample: x (H*W real) -> out (H*W real). y may be null (the linear part only).
void apply_fidelity(const float* x, const ComplexGrid* y, const SamplingMask& m, const FidelityConfig& cfg,
                    std::size_t h, std::size_t w, float* out) {
  ComplexGrid img(h, w);
  std::copy_n(x, h * w, img.re.begin());
  ComplexGrid k = fft2c(img);
  const bool hard = cfg.hard();
  const double keep = hard ? 0.0 : 1.0 / (1.0 + cfg.lambda);
  const double take = hard ? 1.0 : cfg.lambda / (1.0 + cfg.lambda);
  for (std::size_t r = 0; r < h; ++r) {
    if (!m.kept(r)) continue;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      double re = keep * k.re[i], im = keep * k.im[i];
      if (y) {
        re += take * y->re[i];
        im += take * y->im[i];
      }
      k.re[i] = static_cast<float>(re);
      k.im[i] = static_cast<float>(im);
    }
  }
  const ComplexGrid back = ifft2c(k);
  std::copy(back.re.begin(), back.re.end(), out);
}

}  // namespace

ComplexGrid ComplexGrid::from_real(const Tensor& image) {
  std::size_t h, w;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 4 && image.dim(0) == 1 && image.dim(1) == 1) {
    h = image.dim(2);
    w = image.dim(3);
  } else {
    throw ShapeError("from_real: expected [H,W] or [1,1,H,W], got " + to_string(image.shape()));
  }
  ComplexGrid g(h, w);
  std::copy(image.data().begin(), image.data().end(), g.re.begin());
  return g;
}

Tensor ComplexGrid::real_part() const { return Tensor({height, width}, re); }

double ComplexGrid::squared_norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) {
    s += static_cast<double>(re[i]) * re[i] + static_cast<double>(im[i]) * im[i];
  }
  return s;
}

ComplexGrid fft2c(const ComplexGrid& x) { return centered_transform(x, -1); }
ComplexGrid ifft2c(const ComplexGrid& k) { return centered_transform(k, +1); }

std::size_t SamplingMask::kept_count() const {
  return static_cast<std::size_t>(std::count(rows.begin(), rows.end(), std::uint8_t{1}));
}

std::size_t mirror_row(std::size_t row, std::size_t h) {
  const std::size_t center = h / 2;
  return (2 * center + h - row) % h;
}

SamplingMask generate_mask(std::size_t h, double acceleration, std::size_t center_lines,
                           double sigma_frac, std::uint64_t seed) {
  if (h == 0) throw std::invalid_argument("generate_mask: height must be positive");
  if (!(acceleration >= 1.0) || !std::isfinite(acceleration)) {
    throw std::invalid_argument("generate_mask: acceleration must be >= 1");
  }
  if (!(sigma_frac > 0.0) || !std::isfinite(sigma_frac)) {
    throw std::invalid_argument("generate_mask: sigma_frac must be positive");
  }
  const double hd = static_cast<double>(h);
  if (static_cast<double>(center_lines) > std::floor(hd / acceleration)) {
    throw std::invalid_argument("generate_mask: center_lines exceeds floor(h / acceleration)");
  }
  const auto target = static_cast<std::size_t>(std::llround(hd / acceleration));
  if (target == 0) throw std::invalid_argument("generate_mask: acceleration leaves no rows to keep");

  SamplingMask m;
  m.height = h;
  m.rows.assign(h, 0);
  m.acceleration = acceleration;
  m.center_lines = center_lines;
  m.sigma_frac = sigma_frac;
  m.seed = seed;

  const std::size_t center = h / 2;
  const std::size_t first = center - center_lines / 2;
  const double sigma = sigma_frac * hd;
  // Gumbel-top-k: key = log(weight) + Gumbel noise, the noise drawn from a
  // counter-based stream indexed by row.
  auto key = [&](std::size_t r) {
    const double offset = static_cast<double>(r) - static_cast<double>(center);
    const double gumbel = -std::log(-std::log(unit_open(hash_combine(seed, r))));
    return -offset * offset / (2.0 * sigma * sigma) + gumbel;
  };
  struct Candidate {
    double key;
    std::size_t row;
  };
  auto take_best = [](std::vector<Candidate>& c, std::size_t n) {
    std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
      return a.key != b.key ? a.key > b.key : a.row < b.row;
    });
    c.resize(n);
  };

  // Preferred layout: closed under k -> -k.
  auto keep_pair = [&](std::size_t r) {
    m.rows[r] = 1;
    m.rows[mirror_row(r, h)] = 1;
  };
  keep_pair(center);
  for (std::size_t i = 0; i < center_lines; ++i) keep_pair(first + i);
  std::size_t kept = m.kept_count();
  if (kept < target && (target - kept) % 2 == 1 && h % 2 == 0 && !m.rows[0]) {
    m.rows[0] = 1;  // Nyquist row is its own mirror
    ++kept;
  }
  if (kept <= target && (target - kept) % 2 == 0) {
    std::vector<Candidate> candidates;
    for (std::size_t r = center + 1; r < h; ++r) {
      if (!m.rows[r] && mirror_row(r, h) != r) candidates.push_back({key(r), r});
    }
    const std::size_t pairs = (target - kept) / 2;
    if (pairs <= candidates.size()) {
      take_best(candidates, pairs);
      for (const auto& c : candidates) keep_pair(c.row);
      return m;
    }
  }

  // Budget too tight for a symmetric mask: exact center band plus single rows.
  m.rows.assign(h, 0);
  for (std::size_t i = 0; i < center_lines; ++i) m.rows[first + i] = 1;
  if (center_lines == 0) m.rows[center] = 1;
  kept = m.kept_count();
  std::vector<Candidate> candidates;
  for (std::size_t r = 0; r < h; ++r) {
    if (!m.rows[r]) candidates.push_back({key(r), r});
  }
  take_best(candidates, target - std::min(target, kept));
  for (const auto& c : candidates) m.rows[c.row] = 1;
  return m;
}

std::string format_mask(const SamplingMask& m) {
  std::ostringstream os;
  os << "height " << m.height << '\n'
     << "acceleration " << format_double(m.acceleration) << '\n'
     << "center_lines " << m.center_lines << '\n'
     << "sigma_frac " << format_double(m.sigma_frac) << '\n'
     << "seed " << m.seed << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (r) os << ' ';
    os << (m.rows[r] ? '1' : '0');
  }
  os << '\n';
  return os.str();
}

SamplingMask parse_mask(const std::string& text) {
  std::istringstream is(text);
  SamplingMask m;
  auto expect_key = [&](const char* key) {
    std::string k;
    if (!(is >> k) || k != key) throw FormatError(std::string("mask file: expected '") + key + "'");
  };
  expect_key("height");
  if (!(is >> m.height) || m.height == 0) throw FormatError("mask file: bad height");
  expect_key("acceleration");
  if (!(is >> m.acceleration)) throw FormatError("mask file: bad acceleration");
  expect_key("center_lines");
  if (!(is >> m.center_lines)) throw FormatError("mask file: bad center_lines");
  expect_key("sigma_frac");
  if (!(is >> m.sigma_frac)) throw FormatError("mask file: bad sigma_frac");
  expect_key("seed");
  if (!(is >> m.seed)) throw FormatError("mask file: bad seed");
  m.rows.reserve(m.height);
  std::string tok;
  while (is >> tok) {
    if (tok != "0" && tok != "1") throw FormatError("mask file: row flags must be 0 or 1");
    m.rows.push_back(tok == "1" ? 1 : 0);
  }
  if (m.rows.size() != m.height) {
    throw FormatError("mask file: expected " + std::to_string(m.height) + " row flags, got " +
                             std::to_string(m.rows.size()));
  }
  return m;
}

void save_mask(const SamplingMask& m, const std::filesystem::path& path) {
  write_file_atomic(path, format_mask(m));
}

SamplingMask load_mask(const std::filesystem::path& path) { return parse_mask(read_file(path)); }

ComplexGrid undersample(const ComplexGrid& x, const SamplingMask& m) {
  require_mask_fits(x.height, m, "undersample");
  ComplexGrid k = fft2c(x);
  for (std::size_t r = 0; r < k.height; ++r) {
    if (m.kept(r)) continue;
    std::fill_n(k.re.begin() + static_cast<long>(r * k.width), k.width, 0.0f);
    std::fill_n(k.im.begin() + static_cast<long>(r * k.width), k.width, 0.0f);
  }
  return k;
}

ComplexGrid zero_filled(const ComplexGrid& y, const SamplingMask& m) {
  require_mask_fits(y.height, m, "zero_filled");
  return ifft2c(y);
}

Tensor data_fidelity(const Tensor& x_pred, const ComplexGrid& y, const SamplingMask& m,
                     const FidelityConfig& cfg) {
  require_rank(x_pred, 2, "data_fidelity");
  const std::size_t h = x_pred.dim(0), w = x_pred.dim(1);
  if (y.height != h || y.width != w) throw ShapeError("data_fidelity: measurement grid does not match image");
  require_mask_fits(h, m, "data_fidelity");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("data_fidelity: lambda must be >= 0");
  Tensor out({h, w});
  apply_fidelity(x_pred.raw(), &y, m, cfg, h, w, out.raw());
  return out;
}

Var data_fidelity_layer(const Var& x, std::span<const ComplexGrid> ys, const SamplingMask& m,
                        const FidelityConfig& cfg) {
  const Tensor& xv = x->value;
  require_rank(xv, 4, "data_fidelity_layer");
  if (xv.dim(1) != 1) throw ShapeError("data_fidelity_layer: expected a single channel");
  const std::size_t n = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
  if (ys.size() != n) throw ShapeError("data_fidelity_layer: one measurement grid per sample required");
  for (const auto& y : ys) {
    if (y.height != h || y.width != w) throw ShapeError("data_fidelity_layer: measurement grid does not match image");
  }
  require_mask_fits(h, m, "data_fidelity_layer");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("data_fidelity_layer: lambda must be >= 0");

  Tensor out(xv.shape());
  for (std::size_t s = 0; s < n; ++s) {
    apply_fidelity(xv.raw() + s * h * w, &ys[s], m, cfg, h, w, out.raw() + s * h * w);
  }
  // The map is affine in x; its linear part Re(F^H D F) is self-adjoint.
  return make_node(std::move(out), "data_fidelity", {x}, [x, m, cfg, n, h, w](Node& self) {
    Tensor dx(x->value.shape());
    for (std::size_t s = 0; s < n; ++s) {
      apply_fidelity(self.grad.raw() + s * h * w, nullptr, m, cfg, h, w, dx.raw() + s * h * w);
    }
    x->accumulate(dx);
  });
}

}  // namespace wrecon
