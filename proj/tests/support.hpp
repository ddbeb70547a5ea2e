#pragma once

// Shared by the unit suites and the acceptance gate: random problem
// instances and a central finite-difference oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tailext/tailext.hpp"

namespace tailext::testing {

/// A loss evaluation point over a label space with L targets and K auxiliaries.
struct LossInstance {
  LabelSpace space;
  ClassStats stats;
  std::vector<double> z;
  ClassId y = 0;
  double lambda_s = 0.1;
};

/// L >= 1, K >= 0, L + K <= max_classes; each auxiliary class is attached to
/// a random target. Counts span 1..500 and logits [-3, 3].
inline LossInstance random_loss_instance(Rng& rng, std::size_t max_classes = 10, bool allow_aux = true) {
  LossInstance in;
  const std::size_t total = 2 + rng.below(max_classes - 1);
  const std::size_t L = allow_aux ? 1 + rng.below(total) : total;
  const std::size_t K = total - L;
  std::vector<ClassId> neighbors(K);
  for (auto& n : neighbors) n = rng.below(L);
  in.space = LabelSpace(L, neighbors);
  std::vector<std::size_t> counts(total);
  for (auto& c : counts) c = 1 + rng.below(500);
  in.stats = ClassStats(counts);
  in.z.resize(total);
  for (auto& v : in.z) v = rng.uniform(-3.0, 3.0);
  in.y = rng.below(total);
  in.lambda_s = rng.uniform();
  return in;
}

/// d f / d x_i by (f(x + h e_i) - f(x - h e_i)) / 2h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest entry-wise relative error |a - b| / max(|a|, |b|, floor). The
/// floor keeps entries that are numerically zero from dominating.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Flat views over every trainable parameter of a classifier, in a fixed order.
inline std::vector<double*> parameter_slots(ClassifierState& s) {
  std::vector<double*> out;
  auto add = [&](Layer& l) {
    for (auto& w : l.weights) out.push_back(&w);
    for (auto& b : l.bias) out.push_back(&b);
  };
  if (s.hidden) add(*s.hidden);
  add(s.output);
  return out;
}

inline std::vector<double> flatten(const ParamGrads& g) {
  std::vector<double> out;
  auto add = [&](const Layer& l) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  };
  if (g.hidden) add(*g.hidden);
  add(g.output);
  return out;
}

/// Classifier with random parameters for gradient checks.
inline ClassifierState random_classifier(Rng& rng, std::size_t input_dim, const LabelSpace& space,
                                         std::size_t hidden_dim, Activation act) {
  auto s = make_classifier(input_dim, space, hidden_dim, act, rng());
  for (auto* p : parameter_slots(s)) *p = rng.uniform(-1.0, 1.0);
  return s;
}

/// Synthetic hierarchy small enough for unit tests.
inline HierarchySpec small_hierarchy(std::size_t classes = 12, std::size_t superclasses = 3) {
  HierarchySpec h;
  h.num_classes = classes;
  h.num_superclasses = superclasses;
  h.feature_dim = 8;
  h.test_per_class = 5;
  return h;
}

}  // namespace tailext::testing
