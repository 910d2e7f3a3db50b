#pragma once

// Finite-difference checks of the adaptation objectives. The analytic side
// chains the library's forward, objective and backward; the numeric side
// differentiates a loss computed entirely by the oracles.

#include <random>
#include <vector>

#include "ataseg/losses.hpp"
#include "ataseg/segnet.hpp"
#include "oracles.hpp"

namespace gradcheck {

struct Case {
  ataseg::SegNet net;
  ataseg::Tensor image;
  ataseg::ActiveLabelSet labels;
  double lambda_ent = 1.0;
  double lambda_cst = 1.0;
};

// Random small network, 8x8 image and a handful of labels.
inline Case random_case(std::uint64_t seed, int num_labels = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(2, 8), classes(2, 5), pos(0, 7);
  std::uniform_real_distribution<double> lam(0.2, 1.5);
  Case c;
  const int C = classes(rng);
  c.net = ataseg::SegNet::make_default(3, C, seed * 31 + 1, {width(rng), width(rng)});
  // Non-zero biases so every parameter is exercised.
  std::normal_distribution<double> nb(0.0, 0.3);
  auto params = std::vector<double>(c.net.params().begin(), c.net.params().end());
  for (std::size_t l = 0; l < c.net.layers().size(); ++l) {
    const auto& L = c.net.layers()[l];
    const std::size_t b0 = c.net.layer_offset(l) + L.weight_count();
    for (int o = 0; o < L.out_channels; ++o) params[b0 + o] = nb(rng);
  }
  c.net.set_params(params);
  c.image = oracle::random_image(8, 8, 3, rng);
  std::uniform_int_distribution<int> cls(0, C - 1);
  for (int i = 0; i < num_labels; ++i) c.labels.entries.push_back({pos(rng), pos(rng), cls(rng)});
  c.lambda_ent = lam(rng);
  c.lambda_cst = lam(rng);
  return c;
}

inline std::vector<double> analytic_b0(const Case& c) {
  auto fw = ataseg::forward(c.net, c.image);
  auto obj = ataseg::objective_b0(ataseg::softmax_pixels(fw.logits), c.labels, c.lambda_ent);
  return ataseg::backward(c.net, std::move(fw.tape), obj.dloss_dlogits);
}

inline std::vector<double> analytic_b1(const Case& c, ataseg::ConsistencyKind kind,
                                       bool detach = false) {
  auto fw = ataseg::forward(c.net, c.image);
  auto fa = ataseg::forward(c.net, ataseg::flip_horizontal(c.image));
  const auto p = ataseg::softmax_pixels(fw.logits);
  const auto pa = ataseg::softmax_pixels(ataseg::flip_horizontal(fa.logits));
  auto obj = ataseg::objective_b1(p, pa, c.labels, c.lambda_ent, c.lambda_cst, kind, detach);
  auto g = ataseg::backward(c.net, std::move(fw.tape), obj.dloss_dlogits);
  auto ga = ataseg::backward(c.net, std::move(fa.tape), ataseg::flip_horizontal(obj.dloss_dlogits_aug));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += ga[i];
  return g;
}

inline double oracle_b0(const Case& c, const std::vector<double>& params) {
  const auto p = oracle::softmax(oracle::forward(c.net.layers(), params, oracle::to_image(c.image)));
  return oracle::sparse_ce(p, c.labels.entries) + c.lambda_ent * oracle::mean_entropy(p);
}

inline int kind_code(ataseg::ConsistencyKind k) {
  return k == ataseg::ConsistencyKind::kSce ? 0 : k == ataseg::ConsistencyKind::kL1 ? 1 : 2;
}

// fixed_target: when non-null, the consistency term uses it in place of P.
inline double oracle_b1(const Case& c, const std::vector<double>& params,
                        ataseg::ConsistencyKind kind, const oracle::Image* fixed_target = nullptr) {
  const auto img = oracle::to_image(c.image);
  const auto p = oracle::softmax(oracle::forward(c.net.layers(), params, img));
  const auto pa =
      oracle::mirror(oracle::softmax(oracle::forward(c.net.layers(), params, oracle::mirror(img))));
  return oracle::sparse_ce(p, c.labels.entries) + oracle::sparse_ce(pa, c.labels.entries) +
         c.lambda_ent * oracle::mean_entropy(p) +
         c.lambda_cst * oracle::consistency(fixed_target ? *fixed_target : p, pa, kind_code(kind));
}

inline std::vector<double> params_of(const ataseg::SegNet& net) {
  return {net.params().begin(), net.params().end()};
}

}  // namespace gradcheck
