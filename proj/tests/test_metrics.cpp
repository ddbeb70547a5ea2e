#include <gtest/gtest.h>

#include <vector>

#include "support.hpp"

using namespace tailext;
using namespace tailext::testing;

TEST(Splits, Thresholds) {
  EXPECT_EQ(split_of_count(150), Split::many);
  EXPECT_EQ(split_of_count(101), Split::many);
  EXPECT_EQ(split_of_count(100), Split::medium);
  EXPECT_EQ(split_of_count(20), Split::medium);
  EXPECT_EQ(split_of_count(19), Split::few);
  EXPECT_EQ(split_of_count(1), Split::few);
  const auto a = assign_splits(ClassStats({150, 100, 20, 19}));
  EXPECT_EQ(a.tags(), (std::vector<Split>{Split::many, Split::medium, Split::medium, Split::few}));
  EXPECT_EQ(a.count(Split::medium), 2u);
}

TEST(Splits, BandsPartitionPositiveIntegers) {
  for (std::size_t n = 1; n <= 1000; ++n) {
    const Split s = split_of_count(n);
    const int hits = (n > 100) + (n >= 20 && n <= 100) + (n < 20);
    EXPECT_EQ(hits, 1);
    EXPECT_EQ(s == Split::many, n > 100);
    EXPECT_EQ(s == Split::few, n < 20);
  }
}

TEST(Splits, Names) {
  EXPECT_EQ(split_from_string("tail"), Split::few);
  EXPECT_EQ(split_from_string("medium"), Split::medium);
  EXPECT_EQ(split_from_string("head"), Split::many);
  EXPECT_FALSE(split_from_string("middle").has_value());
  EXPECT_STREQ(to_string(Split::few), "few");
}

TEST(Score, PerfectClassifier) {
  const SplitAssignment splits({Split::many, Split::medium, Split::few});
  const std::vector<ClassId> labels{0, 1, 2, 2};
  const auto r = score_predictions(labels, labels, splits);
  EXPECT_EQ(r.overall_acc, 100.0);
  EXPECT_EQ(*r.many_acc, 100.0);
  EXPECT_EQ(*r.few_acc, 100.0);
  EXPECT_EQ(*r.head_tail_gap, 0.0);
  EXPECT_EQ(r.balanced_error->sum, 0.0);
}

TEST(Score, ConstantPredictionOnBalancedPair) {
  const SplitAssignment splits({Split::many, Split::many});
  const std::vector<ClassId> labels{0, 0, 1, 1};
  const std::vector<ClassId> preds(4, 0);
  const auto r = score_predictions(preds, labels, splits);
  EXPECT_EQ(r.overall_acc, 50.0);
  EXPECT_FALSE(r.few_acc.has_value());
  EXPECT_FALSE(r.head_tail_gap.has_value());
  EXPECT_EQ(r.balanced_error->mean, 0.5);
}

TEST(Score, OverallIsWeightedCombinationOfSplits) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng.below(10);
    std::vector<Split> tags(classes);
    for (auto& t : tags) t = static_cast<Split>(rng.below(3));
    const SplitAssignment splits(tags);
    const std::size_t n = 1 + rng.below(200);
    std::vector<ClassId> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.below(classes);
      preds[i] = rng.below(2) == 0 ? labels[i] : rng.below(classes);
    }
    const auto r = score_predictions(preds, labels, splits);
    const double combined = ((r.many_acc ? *r.many_acc * r.num_many : 0.0) + (r.med_acc ? *r.med_acc * r.num_med : 0.0) +
                             (r.few_acc ? *r.few_acc * r.num_few : 0.0)) /
                            static_cast<double>(n);
    EXPECT_NEAR(r.overall_acc, combined, 1e-9);
    EXPECT_EQ(r.num_many + r.num_med + r.num_few, n);
  }
}

TEST(Score, Errors) {
  const SplitAssignment splits({Split::many});
  const std::vector<ClassId> labels{0, 1};
  EXPECT_THROW(score_predictions(labels, labels, splits), DataError);
  EXPECT_THROW(score_predictions(std::vector<ClassId>{}, std::vector<ClassId>{}, splits), DataError);
}

TEST(Evaluate, MaskingRestrictsPredictions) {
  const auto space = build_label_space(2, {{2, 0}});
  auto s = make_classifier(1, space, 0, Activation::identity, 0);
  s.output.bias = {0.0, 0.5, 1.0};  // unmasked argmax is the auxiliary class
  FeatureDataset test(1);
  const std::vector<double> f{0.0};
  test.add(f, 1);
  test.add(f, 1);
  const SplitAssignment splits({Split::few, Split::few});
  const auto masked = evaluate(s, test, splits, true);
  EXPECT_EQ(masked.overall_acc, 100.0);
  EXPECT_TRUE(masked.masked);
  EXPECT_EQ(masked.num_classes_scored, 2u);
  const auto raw = evaluate(s, test, splits, false);
  EXPECT_EQ(raw.overall_acc, 0.0);
  EXPECT_FALSE(raw.masked);
  EXPECT_EQ(raw.num_classes_scored, 3u);
  EXPECT_FALSE(raw.balanced_error.has_value());  // class 0 has no test samples
}
