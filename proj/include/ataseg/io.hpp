#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ataseg/adam.hpp"
#include "ataseg/adapter.hpp"
#include "ataseg/scene.hpp"
#include "ataseg/segnet.hpp"

namespace ataseg {

inline constexpr std::string_view kCheckpointTag = "ataseg-ckpt-v1";
inline constexpr int kFormatVersion = 1;

// PNG ------------------------------------------------------------------

// 8-bit RGB PNG of an H x W x 3 image in [0,1].
std::vector<std::uint8_t> encode_png(const Tensor& image);
// Inverse of encode_png: values come back as k/255.
Tensor decode_png(std::span<const std::uint8_t> bytes);

// 8-bit grayscale PNG holding class ids.
std::vector<std::uint8_t> encode_label_png(std::span<const int> labels, int height,
                                           int width);
std::vector<int> decode_label_png(std::span<const std::uint8_t> bytes, int* height,
                                  int* width);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

// Checkpoints ----------------------------------------------------------

struct Checkpoint {
  SegNet net;
  std::optional<AdamState> adam;
};

// Binary layout, little-endian:
//   "ataseg-ckpt-v1\n"
//   u32 layer count, then per layer i32 kernel, in, out, activation
//   u64 parameter count, f64 parameters
//   u8 has_optimizer; if set: i64 step, f64 lr, beta1, beta2, eps,
//     u64 n, f64 m[n], f64 v[n]
//   "END\n"
void save_checkpoint(const std::filesystem::path& path, const SegNet& net,
                     const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Datasets -------------------------------------------------------------

// Directory of scene_NNNNN.png / labels_NNNNN.png plus manifest.json.
void save_dataset(const std::filesystem::path& dir, std::span<const Scene> scenes);
std::vector<Scene> load_dataset(const std::filesystem::path& dir);

// Per-frame CSV ----------------------------------------------------------

struct CsvFrameRow {
  std::int64_t frame = 0;
  int domain = 0;
  double ce = 0, ce_aug = 0, ent = 0, cst = 0, total = 0;
  bool adapted = false;
  bool oracle_failed = false;
  std::vector<PixelLabel> selected;
  std::vector<std::int64_t> confusion;  // row-major C x C
  double miou_cum = 0;
  double miou_domain = 0;
};

// "r:c:class;..." encoding of a label set.
std::string encode_selected(const ActiveLabelSet& labels);
std::vector<PixelLabel> decode_selected(const std::string& text);

void write_frames_csv(const std::filesystem::path& path,
                      const std::vector<FrameRecord>& records);
std::vector<CsvFrameRow> read_frames_csv(const std::filesystem::path& path);

}  // namespace ataseg
