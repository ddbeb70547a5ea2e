#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tailext/core.hpp"
#include "tailext/rng.hpp"

namespace tailext {

// ---------------------------------------------------------------------------
// Count profiles
// ---------------------------------------------------------------------------

enum class ProfileKind { exponential, pareto };

/// Long-tail count profile over `num_classes` classes, non-increasing in the
/// class index.
///
/// exponential: count_y = max_count * ratio^(y / (num_classes - 1)), so class 0
///   has `max_count` and the last class `max_count * ratio`.
/// pareto: counts follow the power-law density x^-(alpha + 1) sampled at
///   equally spaced x in [1, x_max], with x_max chosen so that the last class
///   has `min_count`.
struct CountProfile {
  ProfileKind kind = ProfileKind::exponential;
  std::size_t num_classes = 100;
  std::size_t max_count = 500;
  double ratio = 0.01;          ///< exponential only, in (0, 1]
  double alpha = 6.0;           ///< pareto only
  std::size_t min_count = 5;    ///< pareto only

  void validate() const {
    if (num_classes == 0) throw ConfigError("count profile needs at least one class");
    if (max_count == 0) throw ConfigError("max_count must be at least 1");
    if (kind == ProfileKind::exponential && !(ratio > 0.0 && ratio <= 1.0)) {
      throw ConfigError("exponential imbalance ratio must be in (0, 1]");
    }
    if (kind == ProfileKind::pareto) {
      if (!(alpha > 0.0)) throw ConfigError("pareto alpha must be positive");
      if (min_count == 0 || min_count > max_count) {
        throw ConfigError("pareto min_count must be in [1, max_count]");
      }
    }
  }

  friend bool operator==(const CountProfile&, const CountProfile&) = default;
};

/// Deterministic per-class counts (the profiles carry no randomness; the seed
/// is accepted for interface symmetry with the other generators).
inline ClassStats make_counts(const CountProfile& profile, [[maybe_unused]] std::uint64_t seed = 0) {
  profile.validate();
  const std::size_t n = profile.num_classes;
  const double mx = static_cast<double>(profile.max_count);
  std::vector<std::size_t> counts(n);
  for (std::size_t y = 0; y < n; ++y) {
    const double t = n == 1 ? 0.0 : static_cast<double>(y) / static_cast<double>(n - 1);
    double c = 0.0;
    if (profile.kind == ProfileKind::exponential) {
      c = mx * std::pow(profile.ratio, t);
    } else {
      const double span = mx / static_cast<double>(profile.min_count);
      const double x_max = std::pow(span, 1.0 / (profile.alpha + 1.0));
      const double x = 1.0 + t * (x_max - 1.0);
      c = mx * std::pow(x, -(profile.alpha + 1.0));
    }
    counts[y] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c)));
  }
  return ClassStats(std::move(counts));
}

// ---------------------------------------------------------------------------
// Gaussian class hierarchy
// ---------------------------------------------------------------------------

/// Superclass / fine-class feature generator.
///
/// Superclass centers are Gaussian with expected norm `superclass_spread`;
/// fine-class centers sit around their superclass center with expected offset
/// norm `fine_spread`. A sample is its class center plus isotropic noise of
/// per-coordinate scale `sample_noise` plus a nuisance component drawn in a
/// rank-`nuisance_rank` subspace shared by every class of the superclass, with
/// per-direction scale `nuisance_spread`. Classes are assigned to superclasses
/// round-robin (class y belongs to superclass y mod S).
struct HierarchySpec {
  std::size_t num_superclasses = 25;
  std::size_t num_classes = 100;
  std::size_t feature_dim = 64;
  double superclass_spread = 10.0;
  double fine_spread = 6.0;
  double sample_noise = 1.0;
  double nuisance_spread = 15.0;
  std::size_t nuisance_rank = 3;
  std::size_t test_per_class = 20;

  void validate() const {
    if (num_classes == 0) throw ConfigError("hierarchy needs at least one class");
    if (num_superclasses == 0 || num_superclasses > num_classes) {
      throw ConfigError("number of superclasses must be in [1, num_classes]");
    }
    if (feature_dim == 0) throw ConfigError("feature dimension must be positive");
    if (!(superclass_spread > fine_spread && fine_spread > sample_noise && sample_noise > 0.0)) {
      throw ConfigError("spreads must satisfy superclass > fine > sample > 0");
    }
    if (nuisance_spread < 0.0) throw ConfigError("nuisance spread must be non-negative");
    if (nuisance_rank > feature_dim) throw ConfigError("nuisance rank exceeds feature dimension");
  }

  friend bool operator==(const HierarchySpec&, const HierarchySpec&) = default;
};

/// Generated hierarchy: the latent structure plus train/test datasets.
struct SyntheticHierarchy {
  HierarchySpec spec;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> superclass_centers;
  std::vector<std::vector<std::vector<double>>> nuisance_bases;  ///< per superclass, rank x dim
  std::vector<std::vector<double>> class_centers;
  std::vector<std::size_t> superclass_of;
  FeatureDataset train;
  FeatureDataset test;

  /// One sample of superclass `g` centered at `center`.
  std::vector<double> draw(std::span<const double> center, std::size_t g, Rng& rng) const {
    std::vector<double> x(center.begin(), center.end());
    for (auto& v : x) v += spec.sample_noise * rng.normal();
    for (const auto& basis : nuisance_bases[g]) {
      const double a = spec.nuisance_spread * rng.normal();
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += a * basis[j];
    }
    return x;
  }
};

namespace detail {

inline std::vector<double> gaussian_vector(std::size_t dim, double norm_scale, Rng& rng) {
  std::vector<double> v(dim);
  const double s = norm_scale / std::sqrt(static_cast<double>(dim));
  for (auto& x : v) x = s * rng.normal();
  return v;
}

/// Orthonormal rows via Gram-Schmidt on Gaussian vectors.
inline std::vector<std::vector<double>> orthonormal_basis(std::size_t rank, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < rank) {
    auto v = gaussian_vector(dim, 1.0, rng);
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) d += v[j] * b[j];
      for (std::size_t j = 0; j < dim; ++j) v[j] -= d * b[j];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-8) continue;
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace detail

/// Draws the hierarchy and its datasets: `counts` training samples per class
/// and a balanced test set of `spec.test_per_class` per class. Every class and
/// superclass draws from its own stream derived from `seed`.
inline SyntheticHierarchy make_hierarchy(const HierarchySpec& spec, const ClassStats& counts,
                                         std::uint64_t seed) {
  spec.validate();
  if (counts.size() != spec.num_classes) {
    throw DataError("count profile has " + std::to_string(counts.size()) + " classes but the hierarchy has " +
                    std::to_string(spec.num_classes));
  }
  const std::size_t C = spec.feature_dim;
  const Rng root = Rng(seed).split("hierarchy");
  SyntheticHierarchy h;
  h.spec = spec;
  h.seed = seed;
  for (std::size_t g = 0; g < spec.num_superclasses; ++g) {
    Rng rng = root.split("superclass").split(static_cast<std::uint64_t>(g));
    h.superclass_centers.push_back(detail::gaussian_vector(C, spec.superclass_spread, rng));
    h.nuisance_bases.push_back(detail::orthonormal_basis(spec.nuisance_rank, C, rng));
  }
  for (std::size_t y = 0; y < spec.num_classes; ++y) {
    const std::size_t g = y % spec.num_superclasses;
    Rng rng = root.split("class").split(static_cast<std::uint64_t>(y));
    auto center = detail::gaussian_vector(C, spec.fine_spread, rng);
    for (std::size_t j = 0; j < C; ++j) center[j] += h.superclass_centers[g][j];
    h.class_centers.push_back(std::move(center));
    h.superclass_of.push_back(g);
  }
  h.train = FeatureDataset(C, Provenance::synthetic);
  h.test = FeatureDataset(C, Provenance::synthetic);
  for (std::size_t y = 0; y < spec.num_classes; ++y) {
    Rng train_rng = root.split("train").split(static_cast<std::uint64_t>(y));
    for (std::size_t i = 0; i < counts.count(y); ++i) {
      h.train.add(h.draw(h.class_centers[y], h.superclass_of[y], train_rng), y,
                  "train-" + std::to_string(y) + "-" + std::to_string(i));
    }
    Rng test_rng = root.split("test").split(static_cast<std::uint64_t>(y));
    for (std::size_t i = 0; i < spec.test_per_class; ++i) {
      h.test.add(h.draw(h.class_centers[y], h.superclass_of[y], test_rng), y,
                 "test-" + std::to_string(y) + "-" + std::to_string(i));
    }
  }
  return h;
}

/// Synthetic neighbor categories and their samples.
struct AuxiliarySet {
  FeatureDataset data;
  LabelSpace space;
};

/// Creates `per_target` auxiliary classes around each of `targets`: the
/// auxiliary center is the target's class center moved by `offset` along a
/// random unit direction, and samples share the target superclass's noise
/// model. Auxiliary ids are appended after the existing classes of `space` in
/// target order.
inline AuxiliarySet make_auxiliary(const SyntheticHierarchy& h, const FeatureDataset& base,
                                   const LabelSpace& space, std::span<const ClassId> targets,
                                   std::size_t per_target, std::size_t samples_per_aux, double offset,
                                   std::uint64_t seed) {
  if (per_target == 0) throw ConfigError("per_target must be at least 1");
  if (samples_per_aux == 0) throw ConfigError("samples_per_aux must be at least 1");
  if (offset < 0.0) throw ConfigError("auxiliary offset must be non-negative");
  const std::size_t L = space.num_target();
  if (L != h.class_centers.size()) throw DataError("label space does not match the hierarchy");
  const auto counts = base.class_counts(space.size());
  const std::size_t C = h.spec.feature_dim;

  std::vector<ClassId> neighbors(space.neighbor_table());
  std::map<ClassId, std::string> names = space.class_names();
  AuxiliarySet out;
  out.data = FeatureDataset(C, Provenance::synthetic);
  const Rng root = Rng(seed).split("auxiliary");
  for (ClassId t : targets) {
    if (!space.is_target(t)) throw DataError("class " + std::to_string(t) + " is not a target");
    if (counts[t] == 0) throw DataError("target class " + std::to_string(t) + " has no samples");
    for (std::size_t k = 0; k < per_target; ++k) {
      const ClassId id = L + neighbors.size();
      Rng rng = root.split(static_cast<std::uint64_t>(t)).split(static_cast<std::uint64_t>(k));
      auto dir = detail::gaussian_vector(C, 1.0, rng);
      double n = 0.0;
      for (double v : dir) n += v * v;
      n = std::sqrt(n);
      std::vector<double> center = h.class_centers[t];
      for (std::size_t j = 0; j < C; ++j) center[j] += offset * dir[j] / n;
      for (std::size_t i = 0; i < samples_per_aux; ++i) {
        out.data.add(h.draw(center, h.superclass_of[t], rng), id,
                     "aux-" + std::to_string(id) + "-" + std::to_string(i));
      }
      neighbors.push_back(t);
      if (auto nm = space.name_of(t)) names.emplace(id, *nm + "/neighbor-" + std::to_string(k));
    }
  }
  out.space = LabelSpace(L, std::move(neighbors), std::move(names));
  return out;
}

}  // namespace tailext
