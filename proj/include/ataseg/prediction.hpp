#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ataseg/tensor.hpp"

namespace ataseg {

// Per-pixel class probability field (H x W x C). Every loss and score reads
// from this.
class PredictionMap {
 public:
  PredictionMap() = default;
  // Takes ownership of probabilities; caller guarantees each pixel lies on
  // the simplex.
  explicit PredictionMap(Tensor probs);

  std::size_t height() const { return probs_.dim(0); }
  std::size_t width() const { return probs_.dim(1); }
  std::size_t classes() const { return probs_.dim(2); }
  std::size_t pixels() const { return height() * width(); }

  double prob(std::size_t r, std::size_t c, std::size_t k) const {
    return probs_.at(r, c, k);
  }
  std::span<const double> pixel(std::size_t r, std::size_t c) const {
    return probs_.pixel(r, c);
  }
  const Tensor& tensor() const { return probs_; }

  // Index of the largest probability; lowest class id wins ties.
  int argmax(std::size_t r, std::size_t c) const;
  // Row-major hard prediction map.
  std::vector<int> hard_labels() const;

 private:
  Tensor probs_;
};

// Numerically stable per-pixel softmax over the channel axis.
PredictionMap softmax_pixels(const Tensor& logits);

// Elementwise average of two aligned prediction maps.
PredictionMap average(const PredictionMap& a, const PredictionMap& b);

}  // namespace ataseg
