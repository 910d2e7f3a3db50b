#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ataseg/scene.hpp"
#include "ataseg/segnet.hpp"

namespace ataseg {

struct PretrainReport {
  // Mean dense cross-entropy per epoch, measured before each scene's update.
  std::vector<double> epoch_mean_ce;
};

// Source-domain supervised training: dense cross-entropy, one Adam step per
// scene, scenes reshuffled every epoch from seed. Throws DivergenceError if
// the loss becomes non-finite.
PretrainReport pretrain(SegNet& net, std::span<const Scene> dataset, int epochs,
                        double lr, std::uint64_t seed = 0);

// Mean dense cross-entropy of net on a scene.
double dense_cross_entropy(const SegNet& net, const Scene& scene);

}  // namespace ataseg
