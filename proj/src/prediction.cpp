#include "ataseg/prediction.hpp"

#include <algorithm>
#include <cmath>

#include "ataseg/error.hpp"

namespace ataseg {

PredictionMap::PredictionMap(Tensor probs) : probs_(std::move(probs)) {
  if (probs_.rank() != 3) {
    throw UsageError("prediction map must be rank 3 (H x W x C)");
  }
}

int PredictionMap::argmax(std::size_t r, std::size_t c) const {
  auto p = pixel(r, c);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> PredictionMap::hard_labels() const {
  std::vector<int> out(pixels());
  for (std::size_t r = 0; r < height(); ++r) {
    for (std::size_t c = 0; c < width(); ++c) {
      out[r * width() + c] = argmax(r, c);
    }
  }
  return out;
}

PredictionMap softmax_pixels(const Tensor& logits) {
  if (logits.rank() != 3) throw UsageError("softmax_pixels expects H x W x C");
  Tensor probs(logits.shape());
  const std::size_t n = logits.dim(0) * logits.dim(1);
  const std::size_t classes = logits.dim(2);
  auto in = logits.data();
  auto out = probs.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = in.data() + i * classes;
    double* p = out.data() + i * classes;
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      p[k] = std::exp(z[k] - zmax);
      sum += p[k];
    }
    for (std::size_t k = 0; k < classes; ++k) p[k] /= sum;
  }
  return PredictionMap(std::move(probs));
}

PredictionMap average(const PredictionMap& a, const PredictionMap& b) {
  if (a.tensor().shape() != b.tensor().shape()) {
    throw UsageError("cannot average prediction maps of different shapes");
  }
  Tensor out(a.tensor().shape());
  auto pa = a.tensor().data();
  auto pb = b.tensor().data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = 0.5 * (pa[i] + pb[i]);
  return PredictionMap(std::move(out));
}

}  // namespace ataseg
