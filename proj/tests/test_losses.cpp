#include <gtest/gtest.h>

#include <cmath>

#include "ataseg/error.hpp"
#include "ataseg/losses.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace ataseg;

namespace {

PredictionMap single_pixel(std::vector<double> p) {
  const std::size_t c = p.size();
  return PredictionMap(Tensor({1, 1, c}, std::move(p)));
}

PredictionMap row_of(const std::vector<std::vector<double>>& pixels) {
  const std::size_t c = pixels.front().size();
  std::vector<double> flat;
  for (const auto& p : pixels) flat.insert(flat.end(), p.begin(), p.end());
  return PredictionMap(Tensor({1, pixels.size(), c}, std::move(flat)));
}

PredictionMap uniform(std::size_t h, std::size_t w, std::size_t c) {
  return PredictionMap(Tensor::image(h, w, c, 1.0 / c));
}

ActiveLabelSet labels_of(std::vector<PixelLabel> e) {
  ActiveLabelSet s;
  s.entries = std::move(e);
  return s;
}

}  // namespace

TEST(CeSparse, HalfProbability) {
  EXPECT_NEAR(ce_sparse(single_pixel({0.5, 0.5}), labels_of({{0, 0, 1}})), 0.6931, 1e-4);
}

TEST(CeSparse, PerfectPredictionIsZero) {
  auto p = row_of({{1, 0, 0}, {0, 0, 1}});
  EXPECT_DOUBLE_EQ(ce_sparse(p, labels_of({{0, 0, 0}, {0, 1, 2}})), 0.0);
}

TEST(CeSparse, ThreeLabels) {
  auto p = row_of({{0.2, 0.8}, {0.5, 0.5}, {0.9, 0.1}});
  EXPECT_NEAR(ce_sparse(p, labels_of({{0, 0, 0}, {0, 1, 0}, {0, 2, 0}})), 0.8027, 1e-4);
}

TEST(CeSparse, EmptyLabelSetIsZero) {
  EXPECT_EQ(ce_sparse(uniform(2, 2, 3), ActiveLabelSet{}), 0.0);
}

TEST(CeSparse, OutOfBoundsLabelIsUsageError) {
  EXPECT_THROW(ce_sparse(uniform(2, 2, 3), labels_of({{2, 0, 0}})), UsageError);
  EXPECT_THROW(ce_sparse(uniform(2, 2, 3), labels_of({{0, 0, 3}})), UsageError);
}

TEST(EntFull, UniformIsLogC) { EXPECT_NEAR(ent_full(uniform(3, 3, 4)), 1.3863, 1e-4); }

TEST(EntFull, OneHotIsZero) {
  EXPECT_DOUBLE_EQ(ent_full(row_of({{1, 0}, {0, 1}})), 0.0);
}

TEST(EntFull, TwoPixelAverage) {
  EXPECT_NEAR(ent_full(row_of({{0.5, 0.5}, {1.0, 0.0}})), 0.3466, 1e-4);
}

TEST(Cst, IdenticalViewsL1AndMseAreZero) {
  std::mt19937_64 rng(1);
  PredictionMap p(oracle::random_probs(4, 4, 3, rng));
  EXPECT_DOUBLE_EQ(cst(p, p, ConsistencyKind::kL1), 0.0);
  EXPECT_DOUBLE_EQ(cst(p, p, ConsistencyKind::kMse), 0.0);
}

TEST(Cst, SceOfIdenticalUniformIsEntropy) {
  EXPECT_NEAR(cst(uniform(2, 2, 2), uniform(2, 2, 2), ConsistencyKind::kSce), 0.6931, 1e-4);
}

TEST(Cst, SceHandValue) {
  EXPECT_NEAR(cst(single_pixel({0.8, 0.2}), single_pixel({0.6, 0.4}), ConsistencyKind::kSce),
              0.5919, 1e-4);
}

TEST(Cst, ShapeMismatchIsUsageError) {
  EXPECT_THROW(cst(uniform(2, 2, 2), uniform(2, 3, 2), ConsistencyKind::kL1), UsageError);
}

TEST(Cst, KindNamesRoundTrip) {
  for (auto k : {ConsistencyKind::kSce, ConsistencyKind::kL1, ConsistencyKind::kMse}) {
    EXPECT_EQ(consistency_from_string(to_string(k)), k);
  }
  EXPECT_THROW(consistency_from_string("kl"), ConfigError);
}

TEST(ObjectiveB0, NullObjective) {
  auto obj = objective_b0(uniform(3, 3, 3), ActiveLabelSet{}, 0.0);
  EXPECT_EQ(obj.loss.total, 0.0);
  for (double v : obj.dloss_dlogits.data()) EXPECT_EQ(v, 0.0);
}

TEST(ObjectiveB0, UniformIsStationaryForEntropy) {
  auto obj = objective_b0(uniform(3, 3, 4), ActiveLabelSet{}, 1.0);
  EXPECT_NEAR(obj.loss.total, std::log(4.0), 1e-12);
  for (double v : obj.dloss_dlogits.data()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(ObjectiveB0, TotalIsWeightedSum) {
  std::mt19937_64 rng(2);
  PredictionMap p(oracle::random_probs(4, 4, 3, rng));
  auto labels = labels_of({{0, 0, 1}, {3, 2, 2}});
  auto obj = objective_b0(p, labels, 0.7);
  EXPECT_NEAR(obj.loss.total, ce_sparse(p, labels) + 0.7 * ent_full(p), 1e-12);
}

TEST(ObjectiveB0, LogitGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(6);
  Tensor z = oracle::random_image(3, 3, 4, rng);
  for (auto& v : z.data()) v = 4 * v - 2;
  auto labels = labels_of({{0, 0, 1}, {2, 1, 3}, {1, 1, 0}});
  auto obj = objective_b0(softmax_pixels(z), labels, 0.8);
  std::vector<double> analytic(obj.dloss_dlogits.data().begin(), obj.dloss_dlogits.data().end());
  auto f = [&](const std::vector<double>& flat) {
    auto p = oracle::softmax(oracle::to_image(Tensor({3, 3, 4}, flat)));
    return oracle::sparse_ce(p, labels.entries) + 0.8 * oracle::mean_entropy(p);
  };
  auto num = oracle::numeric_gradient(f, z.values());
  EXPECT_LT(oracle::max_relative_error(analytic, num), 1e-5);
}

TEST(ObjectiveB1, NullObjective) {
  auto p = uniform(2, 2, 3);
  auto obj = objective_b1(p, p, ActiveLabelSet{}, 0.0, 0.0, ConsistencyKind::kSce);
  EXPECT_EQ(obj.loss.total, 0.0);
}

TEST(ObjectiveB1, SceOnlyOfUniformIsLog2) {
  auto p = uniform(2, 2, 2);
  auto obj = objective_b1(p, p, ActiveLabelSet{}, 0.0, 1.0, ConsistencyKind::kSce);
  EXPECT_NEAR(obj.loss.total, 0.6931, 1e-4);
}

TEST(ObjectiveB1, NetworkGradientEachKind) {
  for (auto kind : {ConsistencyKind::kSce, ConsistencyKind::kL1, ConsistencyKind::kMse}) {
    auto c = gradcheck::random_case(21);
    auto g = gradcheck::analytic_b1(c, kind);
    auto num = oracle::numeric_gradient(
        [&](const auto& p) { return gradcheck::oracle_b1(c, p, kind); }, gradcheck::params_of(c.net));
    EXPECT_LT(oracle::max_relative_error(g, num), 1e-4) << to_string(kind);
  }
}

TEST(ObjectiveB1, DetachedTargetGradient) {
  auto c = gradcheck::random_case(23);
  const auto target = oracle::softmax(
      oracle::forward(c.net.layers(), gradcheck::params_of(c.net), oracle::to_image(c.image)));
  auto g = gradcheck::analytic_b1(c, ConsistencyKind::kSce, true);
  auto num = oracle::numeric_gradient(
      [&](const auto& p) { return gradcheck::oracle_b1(c, p, ConsistencyKind::kSce, &target); },
      gradcheck::params_of(c.net));
  EXPECT_LT(oracle::max_relative_error(g, num), 1e-4);
  auto attached = gradcheck::analytic_b1(c, ConsistencyKind::kSce, false);
  EXPECT_GT(oracle::max_relative_error(g, attached), 1e-3);
}
