#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "wrecon/metrics.hpp"

using namespace wrecon;
using wrecon::testing::random_tensor;

namespace {

Tensor smooth_image(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0), ph = rng.uniform(0, 3);
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      t[i * n + j] = static_cast<float>(0.5 + 0.4 * std::sin(fx * i * 0.3 + ph) * std::cos(fy * j * 0.2));
  return t;
}

// Two-sided exact p by enumerating all 2^n sign patterns over midranks.
double brute_force_p(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i) w += d[i] > 0 ? rank[i] : 0;
  double lo = 0, hi = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1) ? rank[i] : 0;
    if (s <= w + 1e-9) ++lo;
    if (s >= w - 1e-9) ++hi;
  }
  return std::min(1.0, 2 * std::min(lo, hi) / std::ldexp(1.0, static_cast<int>(n)));
}

}  // namespace

TEST(Nmse, Definitions) {
  const Tensor t = random_tensor({8, 8}, 1, 0.1, 1);
  EXPECT_EQ(nmse(t, t), 0.0);
  EXPECT_EQ(nmse(Tensor({8, 8}), t), 1.0);
  EXPECT_EQ(nmse(t * 2.0f, t), 1.0);
  EXPECT_THROW(nmse(t, Tensor({8, 8})), std::invalid_argument);
  EXPECT_THROW(nmse(t, Tensor({4, 4}, 1.0f)), ShapeError);
}

TEST(Psnr, ClosedForms) {
  const Tensor t = random_tensor({16, 16}, 2, 0, 1);
  EXPECT_EQ(psnr(t, t, 1.0), std::numeric_limits<double>::infinity());
  Tensor shifted = t;
  for (auto& v : shifted.data()) v += 0.1f;
  EXPECT_NEAR(psnr(shifted, t, 1.0), 20.0, 1e-3);
  // alternating +-0.1: squared error 0.01 everywhere
  Tensor alt = t;
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] += (i % 2 ? 0.1f : -0.1f);
  EXPECT_NEAR(psnr(alt, t, 1.0), 20.0, 1e-3);
}

TEST(Psnr, ScaleCovariance) {
  const Tensor t = random_tensor({16, 16}, 3, 0, 1), p = random_tensor({16, 16}, 4, 0, 1);
  EXPECT_NEAR(psnr(p, t, 1.0), psnr(p * 4.0f, t * 4.0f, 4.0), 1e-4);
}

TEST(Ssim, IdentityAndConstants) {
  const Tensor t = smooth_image(32, 5);
  EXPECT_NEAR(ssim(t, t, 1.0), 1.0, 1e-6);
  const double c1 = 0.01 * 0.01;
  EXPECT_NEAR(ssim(Tensor({16, 16}), Tensor({16, 16}, 1.0f), 1.0), c1 / (1 + c1), 1e-6);
  EXPECT_THROW(ssim(Tensor({8, 8}), Tensor({8, 8}), 1.0), ShapeError);
}

TEST(Ssim, BoundedAndDegradesWithNoise) {
  const Tensor t = smooth_image(32, 6);
  double prev = 1.0;
  for (double level : {0.02, 0.1, 0.3}) {
    Tensor noisy = t + random_tensor({32, 32}, 7, -level, level);
    const double s = ssim(noisy, t, 1.0);
    EXPECT_LE(s, prev);
    EXPECT_GE(s, -1.0);
    prev = s;
  }
}

TEST(Hfen, ZeroOffsetInvarianceAndNorm) {
  const Tensor t = random_tensor({32, 32}, 8, 0, 1);
  EXPECT_EQ(hfen(t, t), 0.0);
  Tensor offset = t;
  for (auto& v : offset.data()) v += 0.37f;
  EXPECT_LE(hfen(offset, t), 1e-5);
  EXPECT_NEAR(hfen(Tensor({32, 32}), t), 1.0, 1e-12);
  EXPECT_THROW(hfen(t, Tensor({32, 32})), std::invalid_argument);
}

TEST(Hfen, KernelSumsToZeroAndIsSymmetric) {
  const auto k = log_kernel();
  ASSERT_EQ(k.size(), 225u);
  double s = 0;
  for (double v : k) s += v;
  EXPECT_NEAR(s, 0.0, 1e-12);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_DOUBLE_EQ(k[i * 15 + j], k[j * 15 + i]);
      EXPECT_DOUBLE_EQ(k[i * 15 + j], k[(14 - i) * 15 + (14 - j)]);
    }
  EXPECT_LT(k[7 * 15 + 7], 0.0);  // negative center lobe
}

TEST(Metrics, TranslationBehavior) {
  const Tensor t = random_tensor({24, 24}, 9, 0.2, 1), p = random_tensor({24, 24}, 10, 0.2, 1);
  Tensor tp = t, pp = p;
  for (auto& v : tp.data()) v += 1.0f;
  for (auto& v : pp.data()) v += 1.0f;
  EXPECT_NE(nmse(pp, tp), nmse(p, t));
  EXPECT_NEAR(hfen(pp, tp), hfen(p, t), 1e-4);
}

TEST(Wilcoxon, EqualSamples) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6, 7};
  const auto r = wilcoxon_signed_rank(a, a);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.significant);
  EXPECT_EQ(r.n, 0u);
}

TEST(Wilcoxon, DominantEightPairs) {
  const std::vector<double> a{3.1, 2.2, 5.3, 4.4, 6.5, 7.6, 1.7, 9.8};
  std::vector<double> b;
  for (std::size_t i = 0; i < a.size(); ++i) b.push_back(a[i] - 0.1 * (i + 1));
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 256.0);
  EXPECT_TRUE(r.significant);
  EXPECT_FALSE(wilcoxon_signed_rank(a, b, 0.0).significant);
}

TEST(Wilcoxon, ExactMatchesBruteForceEnumeration) {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 6 + rng.below(10);
    std::vector<double> a(n), b(n), d;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::round(rng.uniform(-3, 3) * 2) / 2;  // coarse values produce ties
      b[i] = std::round(rng.uniform(-3, 3) * 2) / 2 + 0.25 * (trial % 3);
      if (a[i] - b[i] != 0) d.push_back(a[i] - b[i]);
    }
    if (d.size() < 6) continue;
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_NEAR(r.p_value, brute_force_p(d), 1e-12) << "trial " << trial;
  }
}

TEST(Wilcoxon, NormalBranchAgreesWithExactAtTwenty) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(20), b(20);
    for (std::size_t i = 0; i < 20; ++i) {
      a[i] = rng.normal() + 0.3;
      b[i] = rng.normal();
    }
    const auto approx = wilcoxon_signed_rank(a, b);
    EXPECT_FALSE(approx.exact);
    std::vector<double> d;
    for (std::size_t i = 0; i < 20; ++i) d.push_back(a[i] - b[i]);
    EXPECT_NEAR(approx.p_value, brute_force_p(d), 0.01);
  }
}

TEST(Wilcoxon, Errors) {
  const std::vector<double> a{1, 2, 3}, b{0, 0, 0};
  EXPECT_THROW(wilcoxon_signed_rank(a, b), std::invalid_argument);
  EXPECT_THROW(wilcoxon_signed_rank(a, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Report, AggregatesAndCsvRoundTrip) {
  std::vector<ImageMetrics> rows;
  for (int i = 0; i < 5; ++i) {
    const Tensor t = smooth_image(16, 20 + i);
    const Tensor p = t + random_tensor({16, 16}, 30 + i, -0.05, 0.05);
    rows.push_back(compute_metrics("img" + std::to_string(i), p, t));
  }
  const MetricReport r = MetricReport::from_images(rows);
  std::vector<double> ps;
  for (const auto& m : rows) ps.push_back(m.psnr);
  double mean = 0;
  for (double v : ps) mean += v;
  mean /= ps.size();
  double var = 0;
  for (double v : ps) var += (v - mean) * (v - mean);
  EXPECT_NEAR(r.psnr.mean, mean, 1e-12);
  EXPECT_NEAR(r.psnr.std, std::sqrt(var / ps.size()), 1e-12);

  std::vector<ImageMetrics> reversed(rows.rbegin(), rows.rend());
  const MetricReport r2 = MetricReport::from_images(reversed);
  EXPECT_EQ(r2.psnr.mean, r.psnr.mean);
  EXPECT_EQ(r2.hfen.std, r.hfen.std);

  const std::string csv = format_report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,nmse,psnr,ssim,hfen");
  EXPECT_NE(csv.find("\nmean,"), std::string::npos);
  EXPECT_NE(csv.find("\nstd,"), std::string::npos);
  const MetricReport back = parse_report_csv(csv);
  ASSERT_EQ(back.images.size(), 5u);
  EXPECT_EQ(back.images[3].id, "img3");
  EXPECT_EQ(back.images[3].ssim, rows[3].ssim);
  EXPECT_EQ(back.psnr.mean, r.psnr.mean);
  EXPECT_EQ(back.nmse.std, r.nmse.std);
  EXPECT_EQ(format_report_csv(back), csv);
}

TEST(Report, IdenticalImagesHaveInfinitePsnrThatSurvivesCsv) {
  const Tensor t = smooth_image(16, 40);
  const MetricReport r = MetricReport::from_images({compute_metrics("a", t, t)});
  const MetricReport back = parse_report_csv(format_report_csv(r));
  EXPECT_EQ(back.images[0].psnr, std::numeric_limits<double>::infinity());
}
