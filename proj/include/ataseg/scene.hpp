#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ataseg/tensor.hpp"

namespace ataseg {

// One synthetic street-scene surrogate: an RGB image in [0,1] quantized to
// 8-bit levels and its pixel-accurate label map.
struct Scene {
  Tensor image;             // H x W x 3
  std::vector<int> labels;  // row-major, H*W entries
  int num_classes = 0;
  std::uint64_t seed = 0;

  int height() const { return static_cast<int>(image.dim(0)); }
  int width() const { return static_cast<int>(image.dim(1)); }
  int label(int r, int c) const { return labels[static_cast<std::size_t>(r) * width() + c]; }
  bool operator==(const Scene&) const = default;
};

// Textured class-0 background plus 3-8 painted shapes (rectangles, disks,
// triangles) of classes 1..C-1 whose colors are drawn around a per-class
// palette entry. Labels follow paint order exactly.
Scene gen_scene(int num_classes, int height, int width, std::uint64_t seed);

// Base color of a class before per-scene jitter.
std::vector<double> class_color(int class_id, int num_classes);

// n scenes with seeds derived from base_seed.
std::vector<Scene> make_dataset(int n, int num_classes, int height, int width,
                                std::uint64_t base_seed);

enum class CorruptionKind { kGaussianNoise, kBrightness, kContrast, kBlur, kPixelate };

std::string to_string(CorruptionKind kind);
CorruptionKind corruption_from_string(const std::string& name);
const std::vector<CorruptionKind>& all_corruptions();

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const CorruptionSpec&) const = default;
};

// Label-preserving degradation of an H x W x 3 image. Output is clipped to
// [0,1] and quantized to 8-bit levels.
Tensor corrupt(const Tensor& image, const CorruptionSpec& spec);

// Round to the nearest multiple of 1/255 after clipping to [0,1].
void quantize_8bit(Tensor& image);

}  // namespace ataseg
