#include <gtest/gtest.h>

#include <cmath>

#include "ataseg/metrics.hpp"
#include "ataseg/summary.hpp"

using namespace ataseg;

TEST(Miou, PerfectPrediction) {
  ConfusionMatrix cm(3);
  std::vector<int> y = {0, 1, 2, 2, 1};
  cm.add_frame(y, y);
  EXPECT_DOUBLE_EQ(miou(cm).mean, 1.0);
}

TEST(Miou, DisjointPrediction) {
  ConfusionMatrix cm(2);
  cm.add_frame(std::vector<int>{0, 0, 1}, std::vector<int>{1, 1, 0});
  EXPECT_DOUBLE_EQ(miou(cm).mean, 0.0);
}

TEST(Miou, TwoClassHandValue) {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 3);
  cm.add(0, 1, 1);
  cm.add(1, 0, 1);
  cm.add(1, 1, 3);
  auto m = miou(cm);
  EXPECT_NEAR(*m.per_class[0], 0.6, 1e-12);
  EXPECT_NEAR(*m.per_class[1], 0.6, 1e-12);
  EXPECT_NEAR(m.mean, 0.6, 1e-12);
}

TEST(Miou, AbsentClassesAreExcluded) {
  ConfusionMatrix cm(4);
  cm.add(0, 0, 5);
  cm.add(1, 1, 5);
  auto m = miou(cm);
  EXPECT_FALSE(m.per_class[2].has_value());
  EXPECT_EQ(m.valid_classes, 2);
  EXPECT_DOUBLE_EQ(m.mean, 1.0);
}

TEST(Miou, ConfusionMatricesAdd) {
  std::vector<int> t1 = {0, 1, 1, 2}, p1 = {0, 1, 2, 2}, t2 = {2, 2, 0}, p2 = {2, 0, 0};
  ConfusionMatrix a(3), b(3), whole(3);
  a.add_frame(t1, p1);
  b.add_frame(t2, p2);
  whole.add_frame(t1, p1);
  whole.add_frame(t2, p2);
  a += b;
  EXPECT_EQ(a, whole);
  EXPECT_EQ(a.total(), 7);
}

TEST(ImbalanceDegree, EmptyTrackerHasNoValue) {
  EXPECT_FALSE(imbalance_degree(ClassFrequencyTracker(4)).has_value());
}

TEST(ImbalanceDegree, UniformIsZero) {
  ClassFrequencyTracker t(4);
  for (int c = 0; c < 4; ++c) t.add(c);
  EXPECT_NEAR(*imbalance_degree(t), 0.0, 1e-12);
}

TEST(ImbalanceDegree, SingleClass) {
  ClassFrequencyTracker t(4);
  for (int i = 0; i < 5; ++i) t.add(2);
  EXPECT_NEAR(*imbalance_degree(t), 0.8660, 1e-4);
}

TEST(ImbalanceDegree, TwoOfFour) {
  ClassFrequencyTracker t(4);
  t.add(0);
  t.add(1);
  EXPECT_NEAR(*imbalance_degree(t), 0.5, 1e-12);
}

TEST(SpatialDiversity, SingleSelectionIsZeroAndFlagged) {
  auto s = spatial_diversity({{{3, 3}}});
  EXPECT_EQ(s.per_frame[0], 0.0);
  EXPECT_TRUE(s.flagged[0]);
  EXPECT_EQ(s.flagged_frames, 1);
}

TEST(SpatialDiversity, PythagoreanPair) {
  EXPECT_DOUBLE_EQ(mean_pairwise_distance(std::vector<Pixel>{{0, 0}, {3, 4}}), 5.0);
}

TEST(SpatialDiversity, CollinearTriple) {
  EXPECT_NEAR(mean_pairwise_distance(std::vector<Pixel>{{0, 0}, {0, 2}, {0, 4}}), 8.0 / 3.0, 1e-12);
}

TEST(SpatialDiversity, StreamMeanSkipsFlaggedFrames) {
  auto s = spatial_diversity({{{0, 0}, {3, 4}}, {{1, 1}}, {}});
  EXPECT_DOUBLE_EQ(s.stream_mean, 5.0);
  EXPECT_DOUBLE_EQ(s.mean_including_flagged, 5.0 / 3.0);
  EXPECT_EQ(s.flagged_frames, 2);
}

TEST(Summary, EmptyRecordsFlagNoData) {
  auto s = summarize({}, desk_ctta_spec(0, 2), RunLabel{});
  EXPECT_TRUE(s["no_data"].get<bool>());
  EXPECT_EQ(s["format_version"].get<int>(), 1);
}

TEST(Summary, DomainAverageIsEqualWeight) {
  ConfusionMatrix a(2), b(2);
  a.add(0, 0, 100);
  a.add(1, 1, 100);
  b.add(0, 1, 1);
  EXPECT_DOUBLE_EQ(domain_average_miou({a, b}), 0.5);
}
