#include "ataseg/metrics.hpp"

#include <cmath>
#include <numeric>

#include "ataseg/error.hpp"

namespace ataseg {

void ConfusionMatrix::add(int truth, int predicted, std::int64_t n) {
  if (truth < 0 || truth >= num_classes_ || predicted < 0 || predicted >= num_classes_) {
    throw UsageError("confusion matrix index out of range");
  }
  counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted] += n;
}

void ConfusionMatrix::add_frame(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw UsageError("truth and prediction maps differ in size");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (num_classes_ == 0) {
    *this = other;
    return *this;
  }
  if (other.num_classes_ != num_classes_) {
    throw UsageError("cannot merge confusion matrices of different class counts");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

MiouResult miou(const ConfusionMatrix& cm) {
  const int n = cm.num_classes();
  MiouResult out;
  out.per_class.resize(n);
  double sum = 0.0;
  for (int c = 0; c < n; ++c) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < n; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t uni = row + col - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    out.per_class[c] = iou;
    sum += iou;
    ++out.valid_classes;
  }
  if (out.valid_classes > 0) out.mean = sum / out.valid_classes;
  return out;
}

std::optional<double> imbalance_degree(const ClassFrequencyTracker& tracker) {
  if (tracker.total() == 0) return std::nullopt;
  const int n = tracker.num_classes();
  const double uniform = 1.0 / n;
  double sq = 0.0;
  for (int c = 0; c < n; ++c) {
    const double d = tracker.frequency(c) - uniform;
    sq += d * d;
  }
  return std::sqrt(sq);
}

double mean_pairwise_distance(std::span<const Pixel> selections) {
  if (selections.size() < 2) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < selections.size(); ++i) {
    for (std::size_t j = i + 1; j < selections.size(); ++j) {
      const double dr = selections[i].row - selections[j].row;
      const double dc = selections[i].col - selections[j].col;
      sum += std::hypot(dr, dc);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

DiversityStats spatial_diversity(const std::vector<std::vector<Pixel>>& per_frame) {
  DiversityStats out;
  double sum = 0.0;
  int counted = 0;
  for (const auto& frame : per_frame) {
    const bool flag = frame.size() < 2;
    const double d = mean_pairwise_distance(frame);
    out.per_frame.push_back(d);
    out.flagged.push_back(flag);
    if (flag) {
      ++out.flagged_frames;
    } else {
      sum += d;
      ++counted;
    }
  }
  if (counted > 0) out.stream_mean = sum / counted;
  if (!per_frame.empty()) out.mean_including_flagged = sum / static_cast<double>(per_frame.size());
  return out;
}

}  // namespace ataseg
