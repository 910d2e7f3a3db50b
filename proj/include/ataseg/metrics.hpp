#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ataseg/annotator.hpp"
#include "ataseg/labels.hpp"

namespace ataseg {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes)
      : num_classes_(num_classes),
        counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  void add(int truth, int predicted, std::int64_t n = 1);
  void add_frame(std::span<const int> truth, std::span<const int> predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  int num_classes() const { return num_classes_; }
  std::int64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted];
  }
  std::int64_t total() const;
  const std::vector<std::int64_t>& counts() const { return counts_; }
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int num_classes_ = 0;
  std::vector<std::int64_t> counts_;
};

struct MiouResult {
  // IoU per class; empty for classes with zero union.
  std::vector<std::optional<double>> per_class;
  // Mean over classes with nonzero union (0 when there are none).
  double mean = 0.0;
  int valid_classes = 0;
};

MiouResult miou(const ConfusionMatrix& cm);

// Euclidean distance of the selected-class distribution from uniform.
// Empty when nothing has been selected.
std::optional<double> imbalance_degree(const ClassFrequencyTracker& tracker);

struct DiversityStats {
  // Mean pairwise distance per frame; 0 for frames with < 2 selections.
  std::vector<double> per_frame;
  // True where the frame had fewer than two selections.
  std::vector<bool> flagged;
  // Mean over unflagged frames (0 if every frame is flagged).
  double stream_mean = 0.0;
  // Mean over all frames, flagged frames counted as 0.
  double mean_including_flagged = 0.0;
  int flagged_frames = 0;
};

// Average pairwise Euclidean distance between selected pixels of one frame.
double mean_pairwise_distance(std::span<const Pixel> selections);

DiversityStats spatial_diversity(const std::vector<std::vector<Pixel>>& per_frame);

}  // namespace ataseg
