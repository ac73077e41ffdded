#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wrecon/kspace.hpp"
#include "wrecon/tensor.hpp"

namespace wrecon {

struct Ellipse {
  double cx, cy;  // center, pixels
  double ax, ay;  // semi-axes, pixels
  double angle;   // radians
  double intensity;  // added inside
};

struct Stroke {
  double x0, y0, x1, y1;
  double width;  // 1 or 2 pixels
  double intensity;
};

struct Phantom {
  Tensor image;  // [H,W] in [0,1]
  std::vector<Ellipse> ellipses;
  std::vector<Stroke> lines;
  std::vector<std::pair<double, double>> dots;
};

/// Smooth ellipse anatomy plus thin high-contrast lines and dots whose number
/// scales with `fine_detail_density`. Deterministic in `seed`.
std::vector<Phantom> gen_phantoms(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed,
                                  double fine_detail_density = 1.0);

/// Single phantom `index` of the stream generated by gen_phantoms.
Phantom gen_phantom(std::size_t index, std::size_t h, std::size_t w, std::uint64_t seed,
                    double fine_detail_density = 1.0);

enum class Split { Train, Val };

struct PairedItem {
  std::string id;
  Tensor target;             // x_t [H,W]
  Tensor input;              // x_u = Re(zero_filled(undersample(x_t))) [H,W]
  ComplexGrid measurements;  // y
};

struct PairedDataset {
  std::vector<PairedItem> items;
  SamplingMask mask;
  Split split = Split::Train;

  std::size_t size() const { return items.size(); }
};

/// Retrospective undersampling of one target image.
PairedItem make_pair(std::string id, const Tensor& target, const SamplingMask& mask);

/// Number of training items for a split ratio over `count` items.
std::size_t train_count(std::size_t count, double split_ratio);

/// Deterministic shuffle of [0, count) followed by a train/val cut.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                           double split_ratio,
                                                                           std::uint64_t seed);

std::pair<PairedDataset, PairedDataset> build_dataset(const std::vector<Tensor>& targets,
                                                      const std::vector<std::string>& ids,
                                                      const SamplingMask& mask, double split_ratio,
                                                      std::uint64_t seed);

std::pair<PairedDataset, PairedDataset> build_dataset(const std::vector<Phantom>& phantoms,
                                                      const SamplingMask& mask, double split_ratio,
                                                      std::uint64_t seed);

/// Raw float image: "IMGF", u32 version, u32 H, u32 W, H*W little-endian f32.
inline constexpr std::uint32_t kImageFormatVersion = 1;
std::string encode_image_f32(const Tensor& image);
Tensor decode_image_f32(const std::string& bytes);
void save_image_f32(const Tensor& image, const std::filesystem::path& path);
Tensor load_image_f32(const std::filesystem::path& path);

/// 8-bit grayscale PNG, values mapped linearly from [lo, hi] and clamped.
void export_png(const Tensor& image, const std::filesystem::path& path, double lo, double hi);
/// Reads any PNG as grayscale floats in [0,1].
Tensor import_png(const std::filesystem::path& path);

struct ManifestItem {
  std::string id;
  std::string path;  // relative to the manifest directory
  Split split = Split::Train;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double fine_detail_density = 1.0;
  double split_ratio = 0.8;
  std::string mask_path;  // optional, relative to the manifest directory
  std::vector<ManifestItem> items;
};

std::string format_manifest(const Manifest& m);
Manifest parse_manifest(const std::string& text);
void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

/// Loads the manifest's images and pairs them with `mask`, honoring the
/// recorded split of each item.
std::pair<PairedDataset, PairedDataset> load_dataset(const std::filesystem::path& manifest_path,
                                                     const SamplingMask& mask);

}  // namespace wrecon
