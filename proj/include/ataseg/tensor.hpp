#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ataseg {

// Dense row-major tensor of doubles. Images and logits are rank 3 (H x W x C,
// channels innermost).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor image(std::size_t height, std::size_t width,
                      std::size_t channels, double fill = 0.0) {
    return Tensor({height, width, channels}, fill);
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 accessors.
  double& at(std::size_t r, std::size_t c, std::size_t k) {
    return data_[(r * shape_[1] + c) * shape_[2] + k];
  }
  double at(std::size_t r, std::size_t c, std::size_t k) const {
    return data_[(r * shape_[1] + c) * shape_[2] + k];
  }
  std::span<double> pixel(std::size_t r, std::size_t c) {
    return std::span<double>(data_).subspan((r * shape_[1] + c) * shape_[2],
                                            shape_[2]);
  }
  std::span<const double> pixel(std::size_t r, std::size_t c) const {
    return std::span<const double>(data_).subspan(
        (r * shape_[1] + c) * shape_[2], shape_[2]);
  }

  bool all_finite() const;
  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Mirror a rank-3 tensor along its width axis.
Tensor flip_horizontal(const Tensor& t);

}  // namespace ataseg
