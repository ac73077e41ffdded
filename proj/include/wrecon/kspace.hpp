#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wrecon/autodiff.hpp"
#include "wrecon/tensor.hpp"

namespace wrecon {

/// Complex 2-D grid stored as separate real and imaginary float planes.
struct ComplexGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> re;
  std::vector<float> im;

  ComplexGrid() = default;
  ComplexGrid(std::size_t h, std::size_t w) : height(h), width(w), re(h * w, 0.0f), im(h * w, 0.0f) {}

  /// Embeds a real [H,W] (or [1,1,H,W]) tensor with zero imaginary part.
  static ComplexGrid from_real(const Tensor& image);
  Tensor real_part() const;
  double squared_norm() const;
  std::size_t size() const noexcept { return re.size(); }
};

/// Centered (DC at index floor(n/2) on each axis), orthonormal 2-D DFT.
ComplexGrid fft2c(const ComplexGrid& x);
ComplexGrid ifft2c(const ComplexGrid& k);

/// Cartesian row mask. Rows are k-space lines in centered order; every
/// column of a kept row is kept.
struct SamplingMask {
  std::size_t height = 0;
  std::vector<std::uint8_t> rows;
  double acceleration = 1.0;
  std::size_t center_lines = 0;
  double sigma_frac = 0.15;
  std::uint64_t seed = 0;

  bool kept(std::size_t row) const { return rows[row] != 0; }
  std::size_t kept_count() const;
};

inline constexpr double kDefaultSigmaFrac = 0.15;

/// Keeps exactly round(h / acceleration) rows: the center_lines rows nearest
/// DC plus rows drawn without replacement with Gaussian weights over the
/// centered row offset (std = sigma_frac * h). Rows are chosen in
/// frequency-mirrored pairs so that real images stay real under data
/// consistency; when the row budget cannot be met symmetrically, single
/// rows are drawn instead. Deterministic in `seed`.
SamplingMask generate_mask(std::size_t h, double acceleration, std::size_t center_lines,
                           double sigma_frac, std::uint64_t seed);

/// Row index of the frequency -k for the row holding frequency k.
std::size_t mirror_row(std::size_t row, std::size_t h);

void save_mask(const SamplingMask& m, const std::filesystem::path& path);
SamplingMask load_mask(const std::filesystem::path& path);
std::string format_mask(const SamplingMask& m);
SamplingMask parse_mask(const std::string& text);

/// y = mask * fft2c(x).
ComplexGrid undersample(const ComplexGrid& x, const SamplingMask& m);
/// x_u = ifft2c(y).
ComplexGrid zero_filled(const ComplexGrid& y, const SamplingMask& m);

struct FidelityConfig {
  /// Blend weight of measured data on the sampled set; +inf means replacement.
  double lambda = std::numeric_limits<double>::infinity();
  /// Noise weight of the penalty form; carried for reference, not applied.
  double alpha = 0.0;

  bool hard() const { return lambda == std::numeric_limits<double>::infinity(); }
  static FidelityConfig replace() { return {}; }
};

/// Real image -> k-space, on sampled rows (x + lambda*y)/(1 + lambda)
/// (y itself when lambda is infinite), unsampled rows untouched, back to
/// image space and take the real part.
Tensor data_fidelity(const Tensor& x_pred, const ComplexGrid& y, const SamplingMask& m,
                     const FidelityConfig& cfg);

/// Batched, differentiable form over [N,1,H,W]; ys[i] are sample i's measurements.
Var data_fidelity_layer(const Var& x, std::span<const ComplexGrid> ys, const SamplingMask& m,
                        const FidelityConfig& cfg);

}  // namespace wrecon
