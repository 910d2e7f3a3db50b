#include "ataseg/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ataseg/adam.hpp"
#include "ataseg/error.hpp"
#include "ataseg/losses.hpp"
#include "ataseg/prediction.hpp"
#include "ataseg/rng.hpp"

namespace ataseg {
namespace {

// Returns the mean CE and fills dlogits with its gradient.
double dense_ce_and_grad(const PredictionMap& p, const Scene& scene, Tensor* dlogits) {
  const std::size_t n = p.pixels();
  const std::size_t classes = p.classes();
  const double inv = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  auto probs = p.tensor().data();
  for (std::size_t i = 0; i < n; ++i) {
    const int y = scene.labels[i];
    loss -= std::log(std::max(probs[i * classes + y], kLogFloor));
    if (dlogits) {
      for (std::size_t k = 0; k < classes; ++k) {
        (*dlogits)[i * classes + k] =
            inv * (probs[i * classes + k] - (static_cast<int>(k) == y ? 1.0 : 0.0));
      }
    }
  }
  return loss * inv;
}

}  // namespace

double dense_cross_entropy(const SegNet& net, const Scene& scene) {
  return dense_ce_and_grad(softmax_pixels(infer(net, scene.image)), scene, nullptr);
}

PretrainReport pretrain(SegNet& net, std::span<const Scene> dataset, int epochs,
                        double lr, std::uint64_t seed) {
  PretrainReport report;
  if (epochs <= 0 || dataset.empty()) return report;
  for (const auto& s : dataset) {
    if (s.num_classes != net.num_classes()) {
      throw ConfigError("dataset class count does not match network head");
    }
  }
  AdamConfig cfg;
  cfg.lr = lr;
  AdamState adam = AdamState::fresh(net.param_count(), cfg);
  Rng rng(mix_seed(seed, seed_tag::kShuffle));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t idx : order) {
      const Scene& scene = dataset[idx];
      auto fwd = forward(net, scene.image);
      PredictionMap p = softmax_pixels(fwd.logits);
      Tensor dlogits(fwd.logits.shape());
      const double loss = dense_ce_and_grad(p, scene, &dlogits);
      if (!std::isfinite(loss)) {
        throw DivergenceError("pretraining diverged in epoch " + std::to_string(epoch) +
                              " (scene seed " + std::to_string(scene.seed) + ")");
      }
      sum += loss;
      auto grad = backward(net, std::move(fwd.tape), dlogits);
      adam_step(net.mutable_params(), grad, adam);
    }
    report.epoch_mean_ce.push_back(sum / static_cast<double>(dataset.size()));
  }
  return report;
}

}  // namespace ataseg
