#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "test_util.hpp"
#include "wrecon/data.hpp"
#include "wrecon/io_util.hpp"
#include "wrecon/metrics.hpp"

using namespace wrecon;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wrecon_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor blur(const Tensor& img, double sigma) {
  const std::size_t h = img.dim(0), w = img.dim(1);
  const int r = 3;
  std::vector<double> k(2 * r + 1);
  double s = 0;
  for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
  for (auto& v : k) v /= s;
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const auto yy = std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(h) - 1);
          const auto xx = std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(w) - 1);
          acc += k[dy + r] * k[dx + r] * img[yy * w + xx];
        }
      out[y * w + x] = static_cast<float>(acc);
    }
  return out;
}

}  // namespace

TEST(Phantoms, DeterministicAndBounded) {
  const auto a = gen_phantoms(5, 32, 48, 7);
  const auto b = gen_phantoms(5, 32, 48, 7);
  const auto c = gen_phantoms(5, 32, 48, 8);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].image.vec(), b[i].image.vec());
    EXPECT_NE(a[i].image.vec(), c[i].image.vec());
    EXPECT_EQ(a[i].image.shape(), (Shape{32, 48}));
    EXPECT_EQ(gen_phantom(i, 32, 48, 7).image.vec(), a[i].image.vec());
  }
}

TEST(Phantoms, ValueRangeOverManySeeds) {
  for (std::size_t i = 0; i < 1000; ++i) {
    const Phantom p = gen_phantom(i, 32, 32, 99, 1.0 + (i % 3));
    float lo = 1, hi = 0;
    for (float v : p.image.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    ASSERT_GE(lo, 0.0f) << i;
    ASSERT_LE(hi, 1.0f) << i;
    ASSERT_GT(hi, 0.0f) << i;
  }
}

TEST(Phantoms, DetailDensityControlsFineStructure) {
  double smooth = 0, detailed = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const Phantom s = gen_phantom(i, 64, 64, 3, 0.0);
    const Phantom d = gen_phantom(i, 64, 64, 3, 1.0);
    EXPECT_TRUE(s.lines.empty());
    EXPECT_TRUE(s.dots.empty());
    EXPECT_FALSE(d.lines.empty());
    smooth += hfen(blur(s.image, 1.0), s.image);
    detailed += hfen(blur(d.image, 1.0), d.image);
  }
  EXPECT_LT(smooth, detailed);
}

TEST(Phantoms, RejectsBadSizes) {
  EXPECT_THROW(gen_phantom(0, 63, 64, 1), std::invalid_argument);
  EXPECT_THROW(gen_phantom(0, 64, 0, 1), std::invalid_argument);
  EXPECT_THROW(gen_phantoms(0, 64, 64, 1), std::invalid_argument);
}

TEST(Dataset, SplitCountsAndDisjointIds) {
  const auto ph = gen_phantoms(250, 16, 16, 1);
  const SamplingMask m = generate_mask(16, 4.0, 2, kDefaultSigmaFrac, 0);
  const auto [tr, va] = build_dataset(ph, m, 0.69, 5);
  EXPECT_EQ(tr.size(), 172u);
  EXPECT_EQ(va.size(), 78u);
  std::set<std::string> ids;
  for (const auto& it : tr.items) ids.insert(it.id);
  for (const auto& it : va.items) EXPECT_FALSE(ids.count(it.id)) << it.id;
  EXPECT_EQ(ids.size(), 172u);
  EXPECT_EQ(train_count(250, 0.8), 200u);
  EXPECT_THROW(train_count(10, 1.0), std::invalid_argument);
  EXPECT_THROW(train_count(10, 0.0), std::invalid_argument);
  const auto again = build_dataset(ph, m, 0.69, 5);
  EXPECT_EQ(again.first.items[17].id, tr.items[17].id);
}

TEST(Dataset, InputsReproducibleFromTargets) {
  const auto ph = gen_phantoms(12, 32, 32, 2);
  const SamplingMask m = generate_mask(32, 5.0, 4, kDefaultSigmaFrac, 1);
  const auto [tr, va] = build_dataset(ph, m, 0.75, 3);
  for (const auto& it : va.items) {
    const Tensor xu = zero_filled(undersample(ComplexGrid::from_real(it.target), m), m).real_part();
    EXPECT_EQ(xu.vec(), it.input.vec());
  }
  EXPECT_THROW(build_dataset(std::vector<Phantom>{}, m, 0.5, 1), std::invalid_argument);
}

TEST(Dataset, UndersamplingDegradesInputs) {
  const auto ph = gen_phantoms(20, 64, 64, 4);
  const SamplingMask m = generate_mask(64, 5.0, 4, kDefaultSigmaFrac, 1);
  const auto [tr, va] = build_dataset(ph, m, 0.5, 3);
  double nm = 0, ps = 0;
  for (const auto& it : tr.items) {
    nm += nmse(it.input, it.target);
    ps += psnr(it.input, it.target, default_data_range(it.target));
  }
  nm /= tr.size();
  ps /= tr.size();
  EXPECT_GT(nm, 0.01);
  EXPECT_TRUE(std::isfinite(ps));
}

TEST(ImageFile, RoundTripBitExact) {
  const fs::path dir = temp_dir("imgf");
  Tensor img = wrecon::testing::random_tensor({5, 7}, 3);
  img[0] = -0.0f;
  img[1] = 1e-38f;
  save_image_f32(img, dir / "a.imgf");
  const Tensor back = load_image_f32(dir / "a.imgf");
  EXPECT_EQ(back.shape(), img.shape());
  EXPECT_EQ(std::memcmp(back.raw(), img.raw(), img.size() * 4), 0);
  const std::string bytes = read_file(dir / "a.imgf");
  EXPECT_EQ(bytes.size(), 16u + 35u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "IMGF");
}

TEST(ImageFile, RejectsCorruptFiles) {
  const std::string good = encode_image_f32(Tensor({4, 4}, 0.5f));
  EXPECT_THROW(decode_image_f32(""), FormatError);
  EXPECT_THROW(decode_image_f32(good.substr(0, 16)), FormatError);
  EXPECT_THROW(decode_image_f32(good.substr(0, good.size() - 1)), FormatError);
  EXPECT_THROW(decode_image_f32(good + "x"), FormatError);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_image_f32(magic), FormatError);
  std::string huge = good;
  for (int i = 8; i < 16; ++i) huge[i] = '\xff';
  EXPECT_THROW(decode_image_f32(huge), FormatError);
  std::string version = good;
  version[4] = 2;
  EXPECT_THROW(decode_image_f32(version), FormatError);
  EXPECT_THROW(load_image_f32("/nonexistent/x.imgf"), std::runtime_error);
}

TEST(Png, WindowingAndRoundTrip) {
  const fs::path dir = temp_dir("png");
  export_png(Tensor({4, 6}, 0.2f), dir / "lo.png", 0.2, 0.8);
  export_png(Tensor({4, 6}, 0.8f), dir / "hi.png", 0.2, 0.8);
  export_png(Tensor({4, 6}, 0.5f), dir / "mid.png", 0.2, 0.8);
  const Tensor lo = import_png(dir / "lo.png"), hi = import_png(dir / "hi.png"), mid = import_png(dir / "mid.png");
  EXPECT_EQ(lo.shape(), (Shape{4, 6}));
  for (float v : lo.data()) EXPECT_EQ(v, 0.0f);
  for (float v : hi.data()) EXPECT_EQ(v, 1.0f);
  for (float v : mid.data()) EXPECT_NEAR(v * 255.0f, 128.0f, 1.0f);
  EXPECT_THROW(export_png(Tensor({2, 2}), dir / "bad.png", 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(import_png(dir / "missing.png"), std::runtime_error);
}

TEST(Manifest, RoundTripAndLoad) {
  const fs::path dir = temp_dir("manifest");
  const SamplingMask mask = generate_mask(16, 2.0, 2, kDefaultSigmaFrac, 1);
  save_mask(mask, dir / "mask.txt");
  Manifest m;
  m.seed = 11;
  m.height = m.width = 16;
  m.mask_path = "mask.txt";
  const auto ph = gen_phantoms(4, 16, 16, 11);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string file = "p" + std::to_string(i) + ".imgf";
    save_image_f32(ph[i].image, dir / file);
    m.items.push_back({"p" + std::to_string(i), file, i == 2 ? Split::Val : Split::Train});
  }
  save_manifest(m, dir / "manifest.json");
  const Manifest back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  const auto [tr, va] = load_dataset(dir / "manifest.json", mask);
  EXPECT_EQ(tr.size(), 3u);
  ASSERT_EQ(va.size(), 1u);
  EXPECT_EQ(va.items[0].id, "p2");
  EXPECT_EQ(va.items[0].target.vec(), ph[2].image.vec());
  EXPECT_THROW(load_dataset(dir / "manifest.json", generate_mask(32, 2.0, 2, kDefaultSigmaFrac, 1)), ShapeError);
  EXPECT_THROW(parse_manifest("{\"version\": 2}"), FormatError);
  EXPECT_THROW(parse_manifest("not json"), FormatError);
}
