#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ataseg/adam.hpp"
#include "ataseg/error.hpp"
#include "ataseg/prediction.hpp"
#include "ataseg/pretrain.hpp"
#include "ataseg/segnet.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace ataseg;

TEST(Tensor, FlipHorizontalTwiceIsIdentity) {
  std::mt19937_64 rng(3);
  auto t = oracle::random_image(4, 5, 2, rng);
  auto f = flip_horizontal(t);
  EXPECT_EQ(f.at(1, 0, 1), t.at(1, 4, 1));
  EXPECT_EQ(flip_horizontal(f), t);
}

TEST(Softmax, UniformForEqualLogits) {
  Tensor z = Tensor::image(1, 1, 4, 0.0);
  auto p = softmax_pixels(z);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p.prob(0, 0, k), 0.25);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Tensor z({1, 1, 2}, std::vector<double>{1000.0, 0.0});
  auto p = softmax_pixels(z);
  EXPECT_DOUBLE_EQ(p.prob(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.prob(0, 0, 1), 0.0);
  EXPECT_TRUE(p.tensor().all_finite());
}

TEST(Softmax, HandValues) {
  Tensor z({1, 1, 3}, std::vector<double>{1, 2, 3});
  auto p = softmax_pixels(z);
  EXPECT_NEAR(p.prob(0, 0, 0), 0.09003, 1e-5);
  EXPECT_NEAR(p.prob(0, 0, 1), 0.24473, 1e-5);
  EXPECT_NEAR(p.prob(0, 0, 2), 0.66524, 1e-5);
}

TEST(Prediction, ArgmaxTieGoesToLowestClass) {
  Tensor z({1, 1, 3}, std::vector<double>{0.2, 0.4, 0.4});
  PredictionMap p(z);
  EXPECT_EQ(p.argmax(0, 0), 1);
}

TEST(Prediction, AverageStaysOnSimplex) {
  std::mt19937_64 rng(5);
  PredictionMap a(oracle::random_probs(6, 6, 4, rng)), b(oracle::random_probs(6, 6, 4, rng));
  auto m = average(a, b);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      double s = 0;
      for (double v : m.pixel(r, c)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(SegNet, ZeroWeightsGiveZeroLogits) {
  SegNet net({{3, 3, 4, Activation::kSilu}, {1, 4, 3, Activation::kIdentity}});
  std::mt19937_64 rng(1);
  auto out = infer(net, oracle::random_image(5, 5, 3, rng));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(SegNet, OneByOneIdentityLayerIsLinearMap) {
  SegNet net({{1, 2, 2, Activation::kIdentity}}, {1.0, 0.5, -2.0, 3.0, 0.1, -0.1});
  Tensor img({1, 1, 2}, std::vector<double>{2.0, 1.0});
  auto out = infer(net, img);
  EXPECT_NEAR(out.at(0, 0, 0), 1.0 * 2.0 + -2.0 * 1.0 + 0.1, 1e-12);
  EXPECT_NEAR(out.at(0, 0, 1), 0.5 * 2.0 + 3.0 * 1.0 - 0.1, 1e-12);
}

TEST(SegNet, ForwardMatchesStraightLineOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto net = SegNet::make_default(3, 4, seed, {5, 6});
    auto img = oracle::random_image(8, 8, 3, rng);
    auto lib = infer(net, img);
    auto ref = oracle::forward(net.layers(), gradcheck::params_of(net), oracle::to_image(img));
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(lib.at(r, c, k), ref[r][c][k], 1e-12);
  }
}

TEST(SegNet, DefaultNetworkSize) {
  auto net = SegNet::make_default(3, 5, 0);
  EXPECT_EQ(net.param_count(), 2853u);
  EXPECT_EQ(net.num_classes(), 5);
}

TEST(SegNet, ChannelMismatchIsConfigError) {
  auto net = SegNet::make_default(3, 5, 0);
  EXPECT_THROW(infer(net, Tensor::image(8, 8, 4)), ConfigError);
}

TEST(SegNet, ZeroCotangentGivesZeroGradient) {
  auto net = SegNet::make_default(3, 3, 2, {4, 4});
  std::mt19937_64 rng(2);
  auto fw = forward(net, oracle::random_image(6, 6, 3, rng));
  auto g = backward(net, std::move(fw.tape), Tensor::image(6, 6, 3, 0.0));
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(SegNet, TinyNetworkGradientMatchesFiniteDifference) {
  SegNet net({{1, 1, 2, Activation::kIdentity}}, {0.7, -0.3, 0.05, 0.2});
  Tensor img({1, 1, 1}, std::vector<double>{1.3});
  ActiveLabelSet labels;
  labels.entries.push_back({0, 0, 1});
  auto fw = forward(net, img);
  auto obj = objective_b0(softmax_pixels(fw.logits), labels, 0.0);
  auto g = backward(net, std::move(fw.tape), obj.dloss_dlogits);
  auto f = [&](const std::vector<double>& p) {
    auto logits = oracle::forward(net.layers(), p, oracle::to_image(img));
    return -std::log(oracle::softmax(logits[0][0])[1]);
  };
  auto num = oracle::numeric_gradient(f, gradcheck::params_of(net));
  EXPECT_LT(oracle::max_relative_error(g, num), 1e-4);
}

TEST(SegNet, B0GradientMatchesFiniteDifferenceOverAllParameters) {
  auto c = gradcheck::random_case(11);
  auto g = gradcheck::analytic_b0(c);
  auto num = oracle::numeric_gradient([&](const auto& p) { return gradcheck::oracle_b0(c, p); },
                                      gradcheck::params_of(c.net));
  EXPECT_LT(oracle::max_relative_error(g, num), 1e-4);
}

TEST(SegNet, StaleTapeIsRejected) {
  auto net = SegNet::make_default(3, 3, 1, {4, 4});
  std::mt19937_64 rng(9);
  auto fw = forward(net, oracle::random_image(4, 4, 3, rng));
  net.mutable_params()[0] += 1.0;
  EXPECT_THROW(backward(net, std::move(fw.tape), Tensor::image(4, 4, 3, 1.0)), UsageError);
}

TEST(SegNet, TapeIsSingleUse) {
  auto net = SegNet::make_default(3, 3, 1, {4, 4});
  std::mt19937_64 rng(9);
  auto fw = forward(net, oracle::random_image(4, 4, 3, rng));
  GradientTape tape = std::move(fw.tape);
  EXPECT_FALSE(fw.tape.valid());
  backward(net, std::move(tape), Tensor::image(4, 4, 3, 1.0));
  EXPECT_THROW(backward(net, std::move(tape), Tensor::image(4, 4, 3, 1.0)), UsageError);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<double> p = {0.5, -1.0};
  std::vector<double> g = {0.0, 0.0};
  auto s = AdamState::fresh(2, AdamConfig{});
  adam_step(p, g, s);
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], -1.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p = {0.0};
  std::vector<double> g = {1.0};
  AdamConfig cfg;
  cfg.lr = 0.1;
  auto s = AdamState::fresh(1, cfg);
  adam_step(p, g, s);
  EXPECT_NEAR(p[0], -0.1, 1e-7);
}

TEST(Adam, MatchesScalarRecursion) {
  AdamConfig cfg;
  cfg.lr = 0.01;
  auto s = AdamState::fresh(3, cfg);
  std::vector<double> p = {0.1, -0.2, 0.3};
  std::vector<oracle::ScalarAdam> ref(3, oracle::ScalarAdam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});
  std::vector<double> expect = p;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  double first_delta = 0, second_delta = 0;
  for (int step = 0; step < 20; ++step) {
    std::vector<double> g = {n(rng), n(rng), step < 2 ? 1.0 : n(rng)};
    const double before = p[2];
    adam_step(p, g, s);
    if (step == 0) first_delta = p[2] - before;
    if (step == 1) second_delta = p[2] - before;
    for (int i = 0; i < 3; ++i) expect[i] = ref[i].step(expect[i], g[i]);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], expect[i], 1e-15);
  }
  EXPECT_NE(first_delta, second_delta);
  EXPECT_EQ(s.step_count, 20);
}

TEST(Adam, LengthMismatchIsUsageError) {
  std::vector<double> p(3), g(2);
  auto s = AdamState::fresh(3, AdamConfig{});
  EXPECT_THROW(adam_step(p, g, s), UsageError);
}

TEST(Pretrain, ZeroEpochsIsNoOp) {
  auto net = SegNet::make_default(3, 4, 1, {4, 4});
  const auto before = gradcheck::params_of(net);
  auto data = make_dataset(2, 4, 16, 16, 0);
  auto rep = pretrain(net, data, 0, 1e-3);
  EXPECT_TRUE(rep.epoch_mean_ce.empty());
  EXPECT_EQ(gradcheck::params_of(net), before);
}

TEST(Pretrain, OverfitsOneSample) {
  auto net = SegNet::make_default(3, 4, 3);
  auto data = make_dataset(1, 4, 16, 16, 42);
  pretrain(net, data, 200, 1e-2, 0);
  const auto pred = softmax_pixels(infer(net, data[0].image)).hard_labels();
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data[0].labels[i];
  EXPECT_GE(static_cast<double>(correct) / pred.size(), 0.99);
}

TEST(Pretrain, DenseCrossEntropyEqualsSparseOverAllPixels) {
  auto net = SegNet::make_default(3, 4, 5, {4, 4});
  auto scene = make_dataset(1, 4, 16, 16, 8).front();
  ActiveLabelSet all;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) all.entries.push_back({r, c, scene.labels[r * 16 + c]});
  const double sparse = ce_sparse(softmax_pixels(infer(net, scene.image)), all);
  EXPECT_NEAR(dense_cross_entropy(net, scene), sparse, 1e-10);
}
