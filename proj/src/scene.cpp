#include "ataseg/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "ataseg/error.hpp"
#include "ataseg/rng.hpp"

namespace ataseg {
namespace {

constexpr int kChannels = 3;

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh);
  const double f = hh - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

enum class Shape { kRect, kDisk, kTriangle };

struct Triangle {
  double y[3];
  double x[3];
};

bool inside_triangle(const Triangle& t, double py, double px) {
  auto edge = [&](int a, int b) {
    return (t.x[b] - t.x[a]) * (py - t.y[a]) - (t.y[b] - t.y[a]) * (px - t.x[a]);
  };
  const double d0 = edge(0, 1), d1 = edge(1, 2), d2 = edge(2, 0);
  const bool neg = d0 < 0 || d1 < 0 || d2 < 0;
  const bool pos = d0 > 0 || d1 > 0 || d2 > 0;
  return !(neg && pos);
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
  const int h = static_cast<int>(image.dim(0));
  const int w = static_cast<int>(image.dim(1));
  const int ch = static_cast<int>(image.dim(2));
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;
  auto clamp_idx = [](int i, int n) { return std::clamp(i, 0, n - 1); };
  Tensor tmp(image.shape());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          acc += kernel[d + radius] * image.at(r, clamp_idx(c + d, w), k);
        }
        tmp.at(r, c, k) = acc;
      }
    }
  }
  Tensor out(image.shape());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          acc += kernel[d + radius] * tmp.at(clamp_idx(r + d, h), c, k);
        }
        out.at(r, c, k) = acc;
      }
    }
  }
  return out;
}

Tensor pixelate(const Tensor& image, int block) {
  const int h = static_cast<int>(image.dim(0));
  const int w = static_cast<int>(image.dim(1));
  const int ch = static_cast<int>(image.dim(2));
  Tensor out(image.shape());
  for (int r0 = 0; r0 < h; r0 += block) {
    for (int c0 = 0; c0 < w; c0 += block) {
      const int r1 = std::min(h, r0 + block), c1 = std::min(w, c0 + block);
      const double n = static_cast<double>((r1 - r0) * (c1 - c0));
      for (int k = 0; k < ch; ++k) {
        double mean = 0.0;
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) mean += image.at(r, c, k);
        mean /= n;
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) out.at(r, c, k) = mean;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> class_color(int class_id, int num_classes) {
  if (class_id == 0) return {0.46, 0.46, 0.46};
  const double hue = static_cast<double>(class_id - 1) / (num_classes - 1);
  auto rgb = hsv_to_rgb(hue, 0.55, 0.72);
  return {rgb[0], rgb[1], rgb[2]};
}

void quantize_8bit(Tensor& image) {
  for (double& v : image.data()) {
    v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  }
}

Scene gen_scene(int num_classes, int height, int width, std::uint64_t seed) {
  if (num_classes < 3) throw ConfigError("gen_scene needs at least 3 classes");
  if (height < 16 || width < 16) throw ConfigError("gen_scene needs H, W >= 16");
  Rng rng(mix_seed(seed, seed_tag::kScene));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Scene scene;
  scene.num_classes = num_classes;
  scene.seed = seed;
  scene.image = Tensor::image(height, width, kChannels);
  scene.labels.assign(static_cast<std::size_t>(height) * width, 0);

  // Per-scene class colors.
  std::vector<std::array<double, 3>> colors(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    auto base = class_color(c, num_classes);
    for (int k = 0; k < kChannels; ++k) colors[c][k] = base[k] + uniform(-0.06, 0.06);
  }

  // Background texture: one oriented sinusoid plus a blotchy low-frequency
  // term.
  const double freq = uniform(0.15, 0.45);
  const double angle = uniform(0.0, std::numbers::pi);
  const double phase = uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = uniform(0.03, 0.07);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double t = freq * (std::cos(angle) * c + std::sin(angle) * r) + phase;
      const double tex = amp * std::sin(t);
      for (int k = 0; k < kChannels; ++k) scene.image.at(r, c, k) = colors[0][k] + tex;
    }
  }

  const double scale = std::min(height, width) / 48.0;
  const int objects = 3 + static_cast<int>(rng() % 6);
  std::uniform_int_distribution<int> pick_class(1, num_classes - 1);
  for (int o = 0; o < objects; ++o) {
    const int cls = pick_class(rng);
    const auto shape = static_cast<Shape>(rng() % 3);
    const double cy = uniform(0.0, height - 1.0);
    const double cx = uniform(0.0, width - 1.0);
    const double size_a = uniform(3.0, 9.0) * scale;
    const double size_b = uniform(3.0, 9.0) * scale;
    std::array<double, 3> color{};
    for (int k = 0; k < kChannels; ++k) color[k] = colors[cls][k] + uniform(-0.03, 0.03);
    Triangle tri{};
    if (shape == Shape::kTriangle) {
      const double rot = uniform(0.0, 2.0 * std::numbers::pi);
      for (int v = 0; v < 3; ++v) {
        const double a = rot + v * 2.0 * std::numbers::pi / 3.0 + uniform(-0.4, 0.4);
        const double rad = (v % 2 == 0 ? size_a : size_b) * 1.3;
        tri.y[v] = cy + rad * std::sin(a);
        tri.x[v] = cx + rad * std::cos(a);
      }
    }
    const int reach = static_cast<int>(std::ceil(1.3 * std::max(size_a, size_b))) + 1;
    const int r_lo = std::max(0, static_cast<int>(cy) - reach);
    const int r_hi = std::min(height - 1, static_cast<int>(cy) + reach);
    const int c_lo = std::max(0, static_cast<int>(cx) - reach);
    const int c_hi = std::min(width - 1, static_cast<int>(cx) + reach);
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        bool in = false;
        switch (shape) {
          case Shape::kRect:
            in = std::abs(r - cy) <= size_a && std::abs(c - cx) <= size_b;
            break;
          case Shape::kDisk:
            in = (r - cy) * (r - cy) + (c - cx) * (c - cx) <= size_a * size_a;
            break;
          case Shape::kTriangle:
            in = inside_triangle(tri, r, c);
            break;
        }
        if (!in) continue;
        scene.labels[static_cast<std::size_t>(r) * width + c] = cls;
        for (int k = 0; k < kChannels; ++k) scene.image.at(r, c, k) = color[k];
      }
    }
  }

  for (double& v : scene.image.data()) v += 0.02 * normal(rng);
  quantize_8bit(scene.image);
  return scene;
}

std::vector<Scene> make_dataset(int n, int num_classes, int height, int width,
                                std::uint64_t base_seed) {
  std::vector<Scene> out;
  out.reserve(n);
  const std::uint64_t root = mix_seed(base_seed, seed_tag::kDataset);
  for (int i = 0; i < n; ++i) {
    out.push_back(gen_scene(num_classes, height, width, mix_seed(root, i)));
  }
  return out;
}

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise: return "gaussian_noise";
    case CorruptionKind::kBrightness: return "brightness";
    case CorruptionKind::kContrast: return "contrast";
    case CorruptionKind::kBlur: return "blur";
    case CorruptionKind::kPixelate: return "pixelate";
  }
  return "gaussian_noise";
}

CorruptionKind corruption_from_string(const std::string& name) {
  for (auto k : all_corruptions()) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown corruption '" + name + "'");
}

const std::vector<CorruptionKind>& all_corruptions() {
  static const std::vector<CorruptionKind> kinds = {
      CorruptionKind::kGaussianNoise, CorruptionKind::kBrightness,
      CorruptionKind::kContrast, CorruptionKind::kBlur,
      CorruptionKind::kPixelate};
  return kinds;
}

void CorruptionSpec::validate() const {
  if (severity < 1 || severity > 5) {
    throw ConfigError("corruption severity must be in 1..5, got " +
                      std::to_string(severity));
  }
}

Tensor corrupt(const Tensor& image, const CorruptionSpec& spec) {
  spec.validate();
  if (image.rank() != 3) throw UsageError("corrupt expects an H x W x C image");
  const int s = spec.severity;
  Tensor out;
  switch (spec.kind) {
    case CorruptionKind::kGaussianNoise: {
      Rng rng(mix_seed(spec.seed, seed_tag::kCorruption));
      std::normal_distribution<double> normal(0.0, 0.04 * s);
      out = image;
      for (double& v : out.data()) v += normal(rng);
      break;
    }
    case CorruptionKind::kBrightness: {
      out = image;
      const double shift = 0.08 * s;
      for (double& v : out.data()) v += shift;
      break;
    }
    case CorruptionKind::kContrast: {
      out = image;
      static constexpr std::array<double, 5> kFactor = {0.75, 0.6, 0.45, 0.35, 0.25};
      const double f = kFactor[s - 1];
      const std::size_t ch = image.dim(2);
      const std::size_t n = image.size() / ch;
      std::vector<double> mean(ch, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < ch; ++k) mean[k] += image[i * ch + k];
      for (double& m : mean) m /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < ch; ++k)
          out[i * ch + k] = (image[i * ch + k] - mean[k]) * f + mean[k];
      break;
    }
    case CorruptionKind::kBlur: {
      static constexpr std::array<double, 5> kSigma = {0.6, 0.9, 1.2, 1.5, 1.9};
      out = gaussian_blur(image, kSigma[s - 1]);
      break;
    }
    case CorruptionKind::kPixelate: {
      out = pixelate(image, s + 1);
      break;
    }
  }
  quantize_8bit(out);
  return out;
}

}  // namespace ataseg
