#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "support.hpp"

using namespace tailext;
using namespace tailext::testing;

namespace {

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

std::vector<double> column(const FeatureDataset& d, ClassId label, std::size_t dim) {
  std::vector<double> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.label(i) == label) out.push_back(d.features(i)[dim]);
  }
  return out;
}

}  // namespace

TEST(CountProfile, ExponentialEndpoints) {
  CountProfile p;
  p.num_classes = 100;
  p.max_count = 500;
  p.ratio = 0.01;
  const auto c = make_counts(p);
  EXPECT_EQ(c.count(0), 500u);
  EXPECT_EQ(c.count(99), 5u);
  EXPECT_DOUBLE_EQ(imbalance_factor(c), 100.0);
  EXPECT_TRUE(std::is_sorted(c.counts().rbegin(), c.counts().rend()));
  p.ratio = 1.0;
  const auto flat = make_counts(p);
  EXPECT_TRUE(std::all_of(flat.counts().begin(), flat.counts().end(), [](std::size_t v) { return v == 500; }));
}

TEST(CountProfile, ParetoEndpointsAndOrder) {
  CountProfile p;
  p.kind = ProfileKind::pareto;
  p.num_classes = 50;
  p.max_count = 1000;
  p.min_count = 4;
  const auto c = make_counts(p);
  EXPECT_EQ(c.count(0), 1000u);
  EXPECT_EQ(c.count(49), 4u);
  EXPECT_TRUE(std::is_sorted(c.counts().rbegin(), c.counts().rend()));
}

TEST(CountProfile, Validation) {
  CountProfile p;
  p.ratio = 0.0;
  EXPECT_THROW(make_counts(p), ConfigError);
  p = CountProfile{};
  p.num_classes = 0;
  EXPECT_THROW(make_counts(p), ConfigError);
  p = CountProfile{};
  p.kind = ProfileKind::pareto;
  p.min_count = 600;
  EXPECT_THROW(make_counts(p), ConfigError);
}

TEST(Hierarchy, CountsMatchAndTestIsBalanced) {
  CountProfile p;
  p.num_classes = 12;
  p.max_count = 40;
  p.ratio = 0.1;
  const auto counts = make_counts(p);
  const auto h = make_hierarchy(small_hierarchy(), counts, 1);
  EXPECT_EQ(h.train.class_counts(12), std::vector<std::size_t>(counts.counts().begin(), counts.counts().end()));
  EXPECT_EQ(h.test.class_counts(12), std::vector<std::size_t>(12, 5));
  EXPECT_EQ(h.superclass_of[4], 1u);
  EXPECT_EQ(h.train.provenance(), Provenance::synthetic);
}

TEST(Hierarchy, SameSeedSameBytes) {
  const ClassStats counts(std::vector<std::size_t>(12, 10));
  const auto a = make_hierarchy(small_hierarchy(), counts, 42);
  const auto b = make_hierarchy(small_hierarchy(), counts, 42);
  const auto c = make_hierarchy(small_hierarchy(), counts, 43);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, c.train);
}

TEST(Hierarchy, NuisanceBasesAreOrthonormal) {
  const auto h = make_hierarchy(small_hierarchy(), ClassStats(std::vector<std::size_t>(12, 2)), 3);
  for (const auto& basis : h.nuisance_bases) {
    ASSERT_EQ(basis.size(), 3u);
    for (std::size_t a = 0; a < basis.size(); ++a) {
      for (std::size_t b = 0; b < basis.size(); ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < basis[a].size(); ++j) dot += basis[a][j] * basis[b][j];
        EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
      }
    }
  }
}

TEST(Hierarchy, Validation) {
  auto spec = small_hierarchy();
  spec.fine_spread = spec.superclass_spread;
  EXPECT_THROW(make_hierarchy(spec, ClassStats(std::vector<std::size_t>(12, 2)), 1), ConfigError);
  EXPECT_THROW(make_hierarchy(small_hierarchy(), ClassStats(std::vector<std::size_t>(5, 2)), 1), DataError);
  spec = small_hierarchy();
  spec.num_superclasses = 13;
  EXPECT_THROW(make_hierarchy(spec, ClassStats(std::vector<std::size_t>(12, 2)), 1), ConfigError);
}

TEST(Auxiliary, LayoutAndNames) {
  const auto h = make_hierarchy(small_hierarchy(), ClassStats(std::vector<std::size_t>(12, 5)), 1);
  std::map<ClassId, std::string> names;
  for (ClassId c = 0; c < 12; ++c) names[c] = "c" + std::to_string(c);
  const LabelSpace space(12, {}, names);
  const std::vector<ClassId> targets{2, 9};
  const auto aux = make_auxiliary(h, h.train, space, targets, 3, 7, 3.0, 1);
  EXPECT_EQ(aux.space.num_auxiliary(), 6u);
  EXPECT_EQ(aux.space.neighbor_of(12), 2u);
  EXPECT_EQ(aux.space.neighbor_of(17), 9u);
  EXPECT_EQ(aux.space.name_of(15).value(), "c9/neighbor-0");
  EXPECT_EQ(aux.data.size(), 42u);
  aux.data.validate(aux.space);
  EXPECT_THROW(make_auxiliary(h, h.train, space, targets, 0, 7, 3.0, 1), ConfigError);
  EXPECT_THROW(make_auxiliary(h, h.train, space, std::vector<ClassId>{12}, 1, 7, 3.0, 1), DataError);
}

TEST(Auxiliary, ZeroOffsetIsIndistinguishableFromTarget) {
  auto spec = small_hierarchy(4, 2);
  const auto h = make_hierarchy(spec, ClassStats(std::vector<std::size_t>(4, 800)), 11);
  const auto aux = make_auxiliary(h, h.train, LabelSpace(4, {}), std::vector<ClassId>{1}, 1, 800, 0.0, 11);
  // 0.1% critical value for n = m = 800 is about 1.95 * sqrt(2 / 800) = 0.0975
  for (std::size_t d = 0; d < spec.feature_dim; ++d) {
    EXPECT_LT(ks_statistic(column(h.train, 1, d), column(aux.data, 4, d)), 0.0975) << "dim " << d;
  }
  // a large offset is detectable along the shifted direction
  const auto far = make_auxiliary(h, h.train, LabelSpace(4, {}), std::vector<ClassId>{1}, 1, 800, 30.0, 11);
  double worst = 0.0;
  for (std::size_t d = 0; d < spec.feature_dim; ++d) {
    worst = std::max(worst, ks_statistic(column(h.train, 1, d), column(far.data, 4, d)));
  }
  EXPECT_GT(worst, 0.2);
}
