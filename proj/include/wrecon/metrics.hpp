#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wrecon/tensor.hpp"

namespace wrecon {

/// ||target - pred||^2 / ||target||^2. Throws if the target is all zero.
double nmse(const Tensor& pred, const Tensor& target);

/// 10 log10(range^2 / MSE) in dB; +infinity when the images are identical.
double psnr(const Tensor& pred, const Tensor& target, double data_range);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Mean local SSIM over every valid position of an 11x11 Gaussian window
/// (sigma 1.5), C1 = (0.01 range)^2, C2 = (0.03 range)^2.
double ssim(const Tensor& pred, const Tensor& target, double data_range);

inline constexpr std::size_t kHfenKernel = 15;
inline constexpr double kHfenSigma = 1.5;

/// 15x15 Laplacian-of-Gaussian kernel (sigma 1.5), shifted to sum to zero.
std::vector<double> log_kernel(std::size_t size = kHfenKernel, double sigma = kHfenSigma);

/// ||LoG(target) - LoG(pred)|| / ||LoG(target)||, symmetric boundary extension.
double hfen(const Tensor& pred, const Tensor& target);

/// data range used for MR magnitude images: max of the target.
double default_data_range(const Tensor& target);

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  double p_value = 1.0;
  bool significant = false;
  std::size_t n = 0;  // pairs left after dropping zero differences
  bool exact = false;
};

/// Two-sided paired signed-rank test on a - b. Exact null distribution for
/// n < 20, normal approximation with tie and continuity correction otherwise.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    double alpha = 0.05);

struct ImageMetrics {
  std::string id;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double hfen = 0.0;
};

ImageMetrics compute_metrics(std::string id, const Tensor& pred, const Tensor& target);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct MetricReport {
  std::vector<ImageMetrics> images;
  MetricStats nmse, psnr, ssim, hfen;

  static MetricReport from_images(std::vector<ImageMetrics> images);
};

MetricStats mean_std(std::span<const double> values);

/// CSV: header, one row per image, then rows with id "mean" and "std".
std::string format_report_csv(const MetricReport& r);
MetricReport parse_report_csv(const std::string& text);
void save_report_csv(const MetricReport& r, const std::filesystem::path& path);
MetricReport load_report_csv(const std::filesystem::path& path);

}  // namespace wrecon
