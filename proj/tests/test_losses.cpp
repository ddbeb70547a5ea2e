#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace tailext;
using namespace tailext::testing;

namespace {

LossValue<double> ns(const LossInstance& in, double lambda) {
  return ns_ce<double>(in.z, in.y, in.stats, in.space, lambda);
}

}  // namespace

TEST(BalCE, UniformCountsTwoClasses) {
  const ClassStats stats({1, 1});
  const std::vector<double> z{0.0, 0.0};
  const auto v = bal_ce<double>(z, 0, stats);
  EXPECT_NEAR(v.loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(v.loss, softmax_ce<double>(z, 0).loss, 1e-15);
}

TEST(BalCE, HandEvaluatedSkewedCounts) {
  const ClassStats stats({3, 1});
  const std::vector<double> z{0.0, 0.0};
  const auto v = bal_ce<double>(z, 1, stats);
  EXPECT_NEAR(v.loss, std::log(4.0), 1e-12);
  ASSERT_EQ(v.grad.size(), 2u);
  EXPECT_NEAR(v.grad[0], 0.75, 1e-12);
  EXPECT_NEAR(v.grad[1], -0.75, 1e-12);
}

TEST(BalCE, RejectsNonFiniteAndBadClass) {
  const ClassStats stats({2, 2});
  const std::vector<double> bad{0.0, std::nan("")};
  EXPECT_THROW(bal_ce<double>(bad, 0, stats), DataError);
  const std::vector<double> inf{0.0, INFINITY};
  EXPECT_THROW(bal_ce<double>(inf, 0, stats), DataError);
  const std::vector<double> z{0.0, 0.0};
  EXPECT_THROW(bal_ce<double>(z, 2, stats), DataError);
  const std::vector<double> z3{0.0, 0.0, 0.0};
  EXPECT_THROW(bal_ce<double>(z3, 0, stats), DataError);
}

TEST(BalCE, StableForHugeLogitsAndOffsets) {
  const ClassStats stats({500, 1});
  const std::vector<double> z{800.0, -800.0};
  const auto a = bal_ce<double>(z, 0, stats);
  const auto b = bal_ce<double>(z, 1, stats);
  EXPECT_TRUE(std::isfinite(a.loss));
  EXPECT_TRUE(std::isfinite(b.loss));
  EXPECT_NEAR(a.loss, 0.0, 1e-12);
  EXPECT_NEAR(b.loss, 1600.0 + std::log(500.0), 1e-9);
}

TEST(BalCEMerged, TwoClassMergedSpace) {
  const ClassStats stats({2, 2});
  const std::vector<double> z{0.0, 0.0};
  EXPECT_NEAR(bal_ce_merged<double>(z, 0, stats).loss, std::log(2.0), 1e-12);
}

TEST(BalCEMerged, EqualsBalCEWithoutAuxiliaries) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto in = random_loss_instance(rng, 10, false);
    const auto a = bal_ce<double>(in.z, in.y, in.stats);
    const auto b = bal_ce_merged<double>(in.z, in.y, in.stats);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.grad, b.grad);
  }
}

TEST(NSCE, FullySilencedSingleNeighbor) {
  const auto space = build_label_space(1, {{1, 0}});
  const ClassStats stats({2, 2});
  const std::vector<double> z{0.0, 0.0};
  EXPECT_NEAR(ns_ce<double>(z, 0, stats, space, 0.0).loss, 0.0, 1e-15);
  EXPECT_NEAR(ns_ce<double>(z, 0, stats, space, 0.1).loss, std::log(1.1), 1e-12);
  EXPECT_NEAR(ns_ce<double>(z, 0, stats, space, 0.1).loss, 0.095310, 1e-6);
}

TEST(NSCE, SilencingIsSymmetric) {
  const auto space = build_label_space(2, {{2, 0}, {3, 1}});
  EXPECT_EQ(silence_weight(space, 0, 2, 0.1), 0.1);
  EXPECT_EQ(silence_weight(space, 2, 0, 0.1), 0.1);
  EXPECT_EQ(silence_weight(space, 0, 3, 0.1), 1.0);
  EXPECT_EQ(silence_weight(space, 0, 1, 0.1), 1.0);
  EXPECT_EQ(silence_weight(space, 2, 3, 0.1), 1.0);
}

TEST(NSCE, SiblingAuxiliariesCompeteAtFullWeight) {
  const auto space = build_label_space(1, {{1, 0}, {2, 0}});
  const ClassStats stats({1, 1, 1});
  const std::vector<double> z{0.0, 0.0, 0.0};
  // true class 1: silenced against target 0, not against sibling 2
  EXPECT_NEAR(ns_ce<double>(z, 1, stats, space, 0.0).loss, std::log(2.0), 1e-12);
}

TEST(NSCE, AuxiliaryTrueClassUsesSymmetricRule) {
  const auto space = build_label_space(2, {{2, 0}});
  const ClassStats stats({1, 1, 1});
  const std::vector<double> z{0.0, 0.0, 0.0};
  EXPECT_NEAR(ns_ce<double>(z, 2, stats, space, 0.5).loss, std::log(1.0 + 0.5 + 1.0), 1e-12);
}

TEST(NSCE, RejectsNegativeLambdaAndSizeMismatch) {
  const auto space = build_label_space(1, {{1, 0}});
  const ClassStats stats({2, 2});
  const std::vector<double> z{0.0, 0.0};
  EXPECT_THROW(ns_ce<double>(z, 0, stats, space, -0.1), ConfigError);
  const std::vector<double> z3{0.0, 0.0, 0.0};
  EXPECT_THROW(ns_ce<double>(z3, 0, ClassStats({1, 1, 1}), space, 0.1), DataError);
}

TEST(Losses, ReductionIdentities) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    auto in = random_loss_instance(rng);
    const ClassStats uniform(std::vector<std::size_t>(in.z.size(), 7));
    EXPECT_NEAR(bal_ce<double>(in.z, in.y, uniform).loss, softmax_ce<double>(in.z, in.y).loss, 1e-12);
    EXPECT_NEAR(ns(in, 1.0).loss, bal_ce_merged<double>(in.z, in.y, in.stats).loss, 1e-12);
  }
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const auto in = random_loss_instance(rng);
    const auto check = [&](auto&& fn) {
      const auto analytic = fn(in.z).grad;
      const auto numeric = central_difference([&](const std::vector<double>& z) { return fn(z).loss; }, in.z);
      EXPECT_LT(max_relative_error(analytic, numeric), 1e-4);
    };
    check([&](const std::vector<double>& z) { return bal_ce<double>(z, in.y, in.stats); });
    check([&](const std::vector<double>& z) { return bal_ce_merged<double>(z, in.y, in.stats); });
    check([&](const std::vector<double>& z) { return ns_ce<double>(z, in.y, in.stats, in.space, in.lambda_s); });
  }
}

TEST(Losses, NonNegativeAndShiftInvariant) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto in = random_loss_instance(rng);
    const double c = rng.uniform(-50.0, 50.0);
    auto shifted = in.z;
    for (auto& v : shifted) v += c;
    const auto a = ns(in, in.lambda_s).loss;
    const auto b = ns_ce<double>(shifted, in.y, in.stats, in.space, in.lambda_s).loss;
    EXPECT_GE(a, 0.0);
    EXPECT_NEAR(a, b, 1e-10);
    EXPECT_NEAR(bal_ce<double>(in.z, in.y, in.stats).loss, bal_ce<double>(shifted, in.y, in.stats).loss, 1e-10);
  }
}

TEST(Losses, NSCEMonotoneInLambda) {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto in = random_loss_instance(rng);
    double prev = ns(in, 0.0).loss;
    for (double lam : {0.05, 0.1, 0.3, 0.5, 0.9, 1.0, 2.0}) {
      const double cur = ns(in, lam).loss;
      EXPECT_GE(cur, prev - 1e-15);
      prev = cur;
    }
  }
}

TEST(Losses, GradientSumsToZeroWhenUnweighted) {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto in = random_loss_instance(rng);
    const auto g = bal_ce<double>(in.z, in.y, in.stats).grad;
    double s = 0.0;
    for (double v : g) s += v;
    EXPECT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(Losses, FloatInstantiation) {
  const ClassStats stats({3, 1});
  const std::vector<float> z{0.0f, 0.0f};
  EXPECT_NEAR(bal_ce<float>(z, 1, stats).loss, std::log(4.0f), 1e-6f);
}

TEST(BatchLoss, MeanOfSamples) {
  const ClassStats stats({3, 1});
  const std::vector<double> z0{0.0, 0.0};
  const std::vector<double> z1{1.0, -1.0};
  const LossSpec spec{LossKind::bal_ce, &stats, nullptr, 1.0};

  const std::vector<ScoredSample<double>> one{{z0, 1}};
  EXPECT_NEAR(batch_loss<double>(one, spec).mean_loss, bal_ce<double>(z0, 1, stats).loss, 1e-15);

  const std::vector<ScoredSample<double>> twice{{z0, 1}, {z0, 1}};
  EXPECT_NEAR(batch_loss<double>(twice, spec).mean_loss, bal_ce<double>(z0, 1, stats).loss, 1e-15);

  const std::vector<ScoredSample<double>> mixed{{z0, 1}, {z1, 0}};
  const auto b = batch_loss<double>(mixed, spec);
  EXPECT_NEAR(b.mean_loss, 0.5 * (bal_ce<double>(z0, 1, stats).loss + bal_ce<double>(z1, 0, stats).loss), 1e-15);
  ASSERT_EQ(b.grads.size(), 2u);
  EXPECT_EQ(b.grads[1], bal_ce<double>(z1, 0, stats).grad);

  EXPECT_THROW(batch_loss<double>(std::span<const ScoredSample<double>>{}, spec), DataError);
}

TEST(BatchLoss, MissingInputsAreConfigErrors) {
  const std::vector<double> z{0.0, 0.0};
  const std::vector<ScoredSample<double>> b{{z, 0}};
  EXPECT_THROW(batch_loss<double>(b, LossSpec{LossKind::bal_ce, nullptr, nullptr, 1.0}), ConfigError);
  const ClassStats stats({1, 1});
  EXPECT_THROW(batch_loss<double>(b, LossSpec{LossKind::ns_ce, &stats, nullptr, 1.0}), ConfigError);
  EXPECT_NO_THROW(batch_loss<double>(b, LossSpec{LossKind::cross_entropy, nullptr, nullptr, 1.0}));
}

TEST(BalancedError, Examples) {
  const std::vector<ClassId> labels{0, 0, 1, 1};
  auto perfect = balanced_error(labels, labels, 2);
  EXPECT_EQ(perfect.sum, 0.0);
  EXPECT_EQ(perfect.mean, 0.0);

  const std::vector<ClassId> zeros{0, 0, 0, 0};
  const auto be = balanced_error(zeros, labels, 2);
  EXPECT_DOUBLE_EQ(be.sum, 1.0);
  EXPECT_DOUBLE_EQ(be.mean, 0.5);

  // per-class error rates 0, 0.5, 1
  const std::vector<ClassId> l3{0, 0, 1, 1, 2, 2};
  const std::vector<ClassId> p3{0, 0, 1, 0, 0, 1};
  const auto be3 = balanced_error(p3, l3, 3);
  EXPECT_DOUBLE_EQ(be3.sum, 1.5);
  EXPECT_DOUBLE_EQ(be3.mean, 0.5);
}

TEST(BalancedError, Errors) {
  const std::vector<ClassId> labels{0, 0};
  EXPECT_THROW(balanced_error(labels, labels, 2), DataError);  // class 1 has no samples
  const std::vector<ClassId> shorter{0};
  EXPECT_THROW(balanced_error(shorter, labels, 1), DataError);
}
