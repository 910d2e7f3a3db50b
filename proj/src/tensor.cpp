#include "ataseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "ataseg/error.hpp"

namespace ataseg {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw UsageError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape product " +
                     std::to_string(product(shape_)));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor flip_horizontal(const Tensor& t) {
  if (t.rank() != 3) throw UsageError("flip_horizontal expects a rank-3 tensor");
  const std::size_t h = t.dim(0), w = t.dim(1);
  Tensor out(t.shape());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      auto src = t.pixel(r, w - 1 - c);
      std::copy(src.begin(), src.end(), out.pixel(r, c).begin());
    }
  }
  return out;
}

}  // namespace ataseg
