#include "wrecon/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "wrecon/io_util.hpp"
#include "wrecon/rng.hpp"

namespace wrecon {
namespace {

constexpr int kSuper = 4;  // supersampling factor for ellipse edges

void paint_ellipse(std::vector<double>& img, std::size_t h, std::size_t w, const Ellipse& e) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double reach = std::max(e.ax, e.ay) + 1.0;
  const long y0 = std::max(0L, static_cast<long>(std::floor(e.cy - reach)));
  const long y1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::ceil(e.cy + reach)));
  const long x0 = std::max(0L, static_cast<long>(std::floor(e.cx - reach)));
  const long x1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::ceil(e.cx + reach)));
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      int inside = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper - e.cx;
          const double py = y + (sy + 0.5) / kSuper - e.cy;
          const double u = (c * px + s * py) / e.ax;
          const double v = (-s * px + c * py) / e.ay;
          if (u * u + v * v <= 1.0) ++inside;
        }
      }
      img[y * w + x] += e.intensity * inside / (kSuper * kSuper);
    }
  }
}

void gaussian_blur(std::vector<double>& img, std::size_t h, std::size_t w, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double ks = 0.0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-i * i / (2.0 * sigma * sigma));
  for (auto& v : k) v /= ks;
  auto clamp_idx = [](long i, long n) { return std::clamp(i, 0L, n - 1); };
  std::vector<double> tmp(img.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img[y * w + clamp_idx(static_cast<long>(x) + i, w)];
      tmp[y * w + x] = acc;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[clamp_idx(static_cast<long>(y) + i, h) * w + x];
      img[y * w + x] = acc;
    }
  }
}

void paint_stroke(std::vector<double>& img, std::size_t h, std::size_t w, const Stroke& st) {
  const double dx = st.x1 - st.x0, dy = st.y1 - st.y0;
  const double len2 = dx * dx + dy * dy;
  const double half = st.width / 2.0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double px = x + 0.5 - st.x0, py = y + 0.5 - st.y0;
      const double t = len2 > 0 ? std::clamp((px * dx + py * dy) / len2, 0.0, 1.0) : 0.0;
      const double ex = px - t * dx, ey = py - t * dy;
      if (ex * ex + ey * ey <= half * half) img[y * w + x] += st.intensity;
    }
  }
}

PairedDataset subset(const std::vector<PairedItem>& all, const std::vector<std::size_t>& idx,
                     const SamplingMask& mask, Split split) {
  PairedDataset d;
  d.mask = mask;
  d.split = split;
  d.items.reserve(idx.size());
  for (auto i : idx) d.items.push_back(all[i]);
  return d;
}

const char* split_name(Split s) { return s == Split::Train ? "train" : "val"; }

}  // namespace

Phantom gen_phantom(std::size_t index, std::size_t h, std::size_t w, std::uint64_t seed,
                    double fine_detail_density) {
  if (h == 0 || w == 0 || h % 2 || w % 2) {
    throw std::invalid_argument("gen_phantoms: height and width must be positive and even");
  }
  if (!(fine_detail_density >= 0.0)) throw std::invalid_argument("gen_phantoms: density must be >= 0");
  Rng rng(hash_combine(seed, index));
  Phantom p;
  const double W = static_cast<double>(w), H = static_cast<double>(h);
  const double cx = W / 2 + rng.uniform(-0.03, 0.03) * W;
  const double cy = H / 2 + rng.uniform(-0.03, 0.03) * H;
  const double ax = rng.uniform(0.36, 0.44) * W, ay = rng.uniform(0.40, 0.47) * H;
  const double tilt = rng.uniform(-0.2, 0.2);

  // Outer shell, then the interior at a lower level, then structures.
  p.ellipses.push_back({cx, cy, ax, ay, tilt, rng.uniform(0.75, 0.95)});
  p.ellipses.push_back({cx, cy, ax * 0.9, ay * 0.9, tilt, -rng.uniform(0.35, 0.5)});
  const int blobs = 3 + static_cast<int>(rng.below(5));
  for (int i = 0; i < blobs; ++i) {
    const double r = rng.uniform(0.0, 0.55), th = rng.uniform(0.0, 2 * std::numbers::pi);
    p.ellipses.push_back({cx + r * ax * std::cos(th), cy + r * ay * std::sin(th), rng.uniform(0.05, 0.2) * W,
                          rng.uniform(0.05, 0.2) * H, rng.uniform(0.0, std::numbers::pi),
                          rng.uniform(-0.25, 0.3)});
  }

  std::vector<double> img(h * w, 0.0);
  for (const auto& e : p.ellipses) paint_ellipse(img, h, w, e);
  gaussian_blur(img, h, w, 0.8);

  const int n_lines = static_cast<int>(std::lround(fine_detail_density * 8.0));
  const int n_dots = static_cast<int>(std::lround(fine_detail_density * 10.0));
  for (int i = 0; i < n_lines; ++i) {
    const double r = rng.uniform(0.0, 0.7), th = rng.uniform(0.0, 2 * std::numbers::pi);
    const double x0 = cx + r * ax * std::cos(th), y0 = cy + r * ay * std::sin(th);
    const double len = rng.uniform(0.08, 0.3) * W, dir = rng.uniform(0.0, std::numbers::pi);
    const double width = rng.uniform() < 0.5 ? 1.0 : 2.0;
    const double sign = rng.uniform() < 0.7 ? 1.0 : -1.0;
    p.lines.push_back({x0, y0, x0 + len * std::cos(dir), y0 + len * std::sin(dir), width,
                       sign * rng.uniform(0.3, 0.5)});
  }
  for (const auto& st : p.lines) paint_stroke(img, h, w, st);
  for (int i = 0; i < n_dots; ++i) {
    const double r = rng.uniform(0.0, 0.75), th = rng.uniform(0.0, 2 * std::numbers::pi);
    const double x = cx + r * ax * std::cos(th), y = cy + r * ay * std::sin(th);
    p.dots.emplace_back(x, y);
    const long px = std::clamp(static_cast<long>(x), 0L, static_cast<long>(w) - 2);
    const long py = std::clamp(static_cast<long>(y), 0L, static_cast<long>(h) - 2);
    const double v = rng.uniform(0.35, 0.6);
    const bool big = rng.uniform() < 0.5;
    img[py * w + px] += v;
    if (big) {
      img[py * w + px + 1] += v;
      img[(py + 1) * w + px] += v;
      img[(py + 1) * w + px + 1] += v;
    }
  }

  p.image = Tensor({h, w});
  for (std::size_t i = 0; i < img.size(); ++i) p.image[i] = static_cast<float>(std::clamp(img[i], 0.0, 1.0));
  return p;
}

std::vector<Phantom> gen_phantoms(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed,
                                  double fine_detail_density) {
  if (count == 0) throw std::invalid_argument("gen_phantoms: count must be >= 1");
  std::vector<Phantom> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = gen_phantom(i, h, w, seed, fine_detail_density);
  return out;
}

PairedItem make_pair(std::string id, const Tensor& target, const SamplingMask& mask) {
  PairedItem it;
  it.id = std::move(id);
  it.target = target.rank() == 2 ? target : target.reshaped({target.dim(target.rank() - 2), target.dim(target.rank() - 1)});
  it.measurements = undersample(ComplexGrid::from_real(it.target), mask);
  it.input = zero_filled(it.measurements, mask).real_part();
  return it;
}

std::size_t train_count(std::size_t count, double split_ratio) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw std::invalid_argument("split ratio must lie strictly between 0 and 1");
  }
  // Tolerate representation error in ratios such as 0.8 * 250.
  return static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(count) + 1e-9));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                           double split_ratio,
                                                                           std::uint64_t seed) {
  const std::size_t n_train = train_count(count, split_ratio);
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(hash_combine(seed, 0x5911));
  rng.shuffle(idx);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> val(idx.begin() + static_cast<long>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

std::pair<PairedDataset, PairedDataset> build_dataset(const std::vector<Tensor>& targets,
                                                      const std::vector<std::string>& ids,
                                                      const SamplingMask& mask, double split_ratio,
                                                      std::uint64_t seed) {
  if (targets.empty()) throw std::invalid_argument("build_dataset: no images");
  if (ids.size() != targets.size()) throw std::invalid_argument("build_dataset: one id per image required");
  auto [tr, va] = split_indices(targets.size(), split_ratio, seed);
  std::vector<PairedItem> all;
  all.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) all.push_back(make_pair(ids[i], targets[i], mask));
  return {subset(all, tr, mask, Split::Train), subset(all, va, mask, Split::Val)};
}

std::pair<PairedDataset, PairedDataset> build_dataset(const std::vector<Phantom>& phantoms,
                                                      const SamplingMask& mask, double split_ratio,
                                                      std::uint64_t seed) {
  if (phantoms.empty()) throw std::invalid_argument("build_dataset: no phantoms");
  std::vector<Tensor> targets;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < phantoms.size(); ++i) {
    targets.push_back(phantoms[i].image);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "phantom_%04zu", i);
    ids.emplace_back(buf);
  }
  return build_dataset(targets, ids, mask, split_ratio, seed);
}

std::string encode_image_f32(const Tensor& image) {
  require_rank(image, 2, "save_image_f32");
  std::string out = "IMGF";
  put_u32(out, kImageFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(image.dim(0)));
  put_u32(out, static_cast<std::uint32_t>(image.dim(1)));
  put_f32s(out, image.data());
  return out;
}

Tensor decode_image_f32(const std::string& bytes) {
  ByteReader r(bytes, "IMGF image");
  if (r.take(4) != "IMGF") throw FormatError("IMGF image: bad magic");
  const auto version = r.u32();
  if (version != kImageFormatVersion) throw FormatError("IMGF image: unsupported version " + std::to_string(version));
  const std::uint64_t h = r.u32(), w = r.u32();
  if (h == 0 || w == 0) throw FormatError("IMGF image: zero extent");
  constexpr std::uint64_t kMaxExtent = 1u << 15;
  if (h > kMaxExtent || w > kMaxExtent) throw FormatError("IMGF image: dimensions too large");
  if (r.remaining() != h * w * 4) {
    throw FormatError("IMGF image: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(h * w * 4));
  }
  Tensor t({static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  r.f32s(t.data());
  return t;
}

void save_image_f32(const Tensor& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_image_f32(image));
}

Tensor load_image_f32(const std::filesystem::path& path) { return decode_image_f32(read_file(path)); }

void export_png(const Tensor& image, const std::filesystem::path& path, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("export_png: window must satisfy lo < hi");
  const Tensor img = image.rank() == 4 ? image.reshaped({image.dim(2), image.dim(3)}) : image;
  require_rank(img, 2, "export_png");
  const std::size_t h = img.dim(0), w = img.dim(1);
  std::vector<png_byte> pixels(h * w);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double t = std::clamp((img[i] - lo) / (hi - lo), 0.0, 1.0);
    pixels[i] = static_cast<png_byte>(std::lround(t * 255.0));
  }
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(w);
  pi.height = static_cast<png_uint_32>(h);
  pi.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&pi, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("export_png: ") + pi.message);
  }
  std::string buf(size, '\0');
  if (!png_image_write_to_memory(&pi, buf.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("export_png: ") + pi.message);
  }
  buf.resize(size);
  write_file_atomic(path, buf);
}

Tensor import_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size())) {
    throw FormatError("import_png: " + path.string() + ": " + pi.message);
  }
  pi.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw FormatError("import_png: " + path.string() + ": " + pi.message);
  }
  Tensor t({pi.height, pi.width});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(pixels[i] / 255.0);
  return t;
}

std::string format_manifest(const Manifest& m) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["height"] = m.height;
  j["width"] = m.width;
  j["fine_detail_density"] = m.fine_detail_density;
  j["split_ratio"] = m.split_ratio;
  if (!m.mask_path.empty()) j["mask"] = m.mask_path;
  auto& items = j["items"] = nlohmann::ordered_json::array();
  for (const auto& it : m.items) {
    items.push_back({{"id", it.id}, {"path", it.path}, {"split", split_name(it.split)}});
  }
  return j.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw FormatError("manifest: unsupported version");
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    m.fine_detail_density = j.value("fine_detail_density", 1.0);
    m.split_ratio = j.value("split_ratio", 0.8);
    m.mask_path = j.value("mask", std::string());
    for (const auto& it : j.at("items")) {
      ManifestItem mi;
      mi.id = it.at("id").get<std::string>();
      mi.path = it.at("path").get<std::string>();
      const auto s = it.at("split").get<std::string>();
      if (s != "train" && s != "val") throw FormatError("manifest: split must be 'train' or 'val'");
      mi.split = s == "train" ? Split::Train : Split::Val;
      m.items.push_back(std::move(mi));
    }
    if (m.items.empty()) throw FormatError("manifest: no items");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  write_file_atomic(path, format_manifest(m));
}

Manifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_file(path)); }

std::pair<PairedDataset, PairedDataset> load_dataset(const std::filesystem::path& manifest_path,
                                                     const SamplingMask& mask) {
  const Manifest m = load_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  PairedDataset train, val;
  train.mask = val.mask = mask;
  train.split = Split::Train;
  val.split = Split::Val;
  for (const auto& it : m.items) {
    const auto p = dir / it.path;
    Tensor img = p.extension() == ".png" ? import_png(p) : load_image_f32(p);
    if (img.dim(0) != mask.height) {
      throw ShapeError("dataset image '" + it.id + "' has height " + std::to_string(img.dim(0)) +
                       " but the mask has " + std::to_string(mask.height) + " rows");
    }
    if (img.dim(0) != m.height || img.dim(1) != m.width) {
      throw ShapeError("dataset image '" + it.id + "' does not match the manifest size");
    }
    (it.split == Split::Train ? train : val).items.push_back(make_pair(it.id, img, mask));
  }
  return {std::move(train), std::move(val)};
}

}  // namespace wrecon
