#pragma once

#include <cstdint>
#include <vector>

namespace ataseg {

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

struct PixelLabel {
  int row = 0;
  int col = 0;
  int class_id = 0;
  bool operator==(const PixelLabel&) const = default;
};

// Sparse annotations bought for one frame, in selection order.
struct ActiveLabelSet {
  std::int64_t frame_id = 0;
  std::vector<PixelLabel> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const ActiveLabelSet&) const = default;
};

}  // namespace ataseg
