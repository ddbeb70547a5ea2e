#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "tailext/core.hpp"
#include "tailext/rng.hpp"
#include "tailext/splits.hpp"

namespace tailext {

/// Total training samples in the head (many), medium and tail (few) splits.
struct SplitTotals {
  std::size_t head = 0;
  std::size_t medium = 0;
  std::size_t tail = 0;
};

inline SplitTotals split_totals(const ClassStats& stats, const SplitAssignment& splits) {
  SplitTotals t;
  for (std::size_t c = 0; c < stats.size(); ++c) {
    switch (splits.of(c)) {
      case Split::many: t.head += stats.count(c); break;
      case Split::medium: t.medium += stats.count(c); break;
      case Split::few: t.tail += stats.count(c); break;
    }
  }
  return t;
}

/// 1 : ceil(N_h / N_m) : ceil(N_h / N_t), in exact integer arithmetic.
inline AuxRatio derive_ratio(const SplitTotals& totals) {
  if (totals.head == 0 || totals.medium == 0 || totals.tail == 0) {
    throw DataError("auxiliary ratio needs non-empty head, medium and tail splits");
  }
  auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  return AuxRatio{1.0, static_cast<double>(ceil_div(totals.head, totals.medium)),
                  static_cast<double>(ceil_div(totals.head, totals.tail))};
}

/// Per-epoch auxiliary sampling plan.
///
/// Each expanded target owns up to `per_target` auxiliary categories (the
/// size of the neighbor query). The ratio decides how many of them are
/// attached for a target of a given split: the split with the largest ratio
/// entry uses all `per_target`, the others ceil(per_target * r / r_max).
/// Every attached category contributes at most `per_class_cap` samples per
/// epoch.
struct AuxSamplingPlan {
  std::size_t per_class_cap = 50;
  AuxRatio ratio{};
  std::size_t per_target = 5;
  std::map<ClassId, Split> expanded_targets;

  void validate() const {
    if (per_class_cap == 0) throw ConfigError("per-class cap must be at least 1");
    if (ratio.head < 0 || ratio.medium < 0 || ratio.tail < 0) {
      throw ConfigError("auxiliary ratio entries must be non-negative");
    }
  }

  [[nodiscard]] double ratio_of(Split s) const noexcept {
    switch (s) {
      case Split::many: return ratio.head;
      case Split::medium: return ratio.medium;
      case Split::few: return ratio.tail;
    }
    return 0.0;
  }

  /// Number of auxiliary categories attached to a target of split `s`.
  [[nodiscard]] std::size_t categories_for(Split s) const noexcept {
    const double rmax = std::max({ratio.head, ratio.medium, ratio.tail});
    const double r = ratio_of(s);
    if (rmax <= 0.0 || r <= 0.0) return 0;
    const auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(per_target) * r / rmax - 1e-12));
    return std::min(n, per_target);
  }

  /// Attachment flag per auxiliary class of `space` (index k for class L+k).
  [[nodiscard]] std::vector<bool> attached(const LabelSpace& space) const {
    std::vector<bool> out(space.num_auxiliary(), false);
    for (const auto& [target, split] : expanded_targets) {
      if (!space.is_target(target)) continue;
      const auto aux = space.auxiliaries_of(target);
      const std::size_t n = std::min(categories_for(split), aux.size());
      for (std::size_t i = 0; i < n; ++i) out[aux[i] - space.num_target()] = true;
    }
    return out;
  }
};

/// Ratio for split totals where some split may be empty: empty splits get 0
/// and the first non-empty split (head, medium, tail) is the reference. With
/// all three present this is `derive_ratio`.
inline AuxRatio derive_ratio_partial(const SplitTotals& totals) {
  if (totals.head > 0 && totals.medium > 0 && totals.tail > 0) return derive_ratio(totals);
  const std::size_t ref = totals.head > 0 ? totals.head : totals.medium > 0 ? totals.medium : totals.tail;
  if (ref == 0) throw DataError("auxiliary ratio over an empty target set");
  auto entry = [&](std::size_t n) { return n == 0 ? 0.0 : static_cast<double>((ref + n - 1) / n); };
  return AuxRatio{entry(totals.head), entry(totals.medium), entry(totals.tail)};
}

/// Plan with every target of `target_stats` listed under its split, subject to
/// the `expand` filter (e.g. only medium and few). A missing ratio is derived
/// from the split totals.
inline AuxSamplingPlan make_sampling_plan(const ClassStats& target_stats, std::size_t per_class_cap,
                                          std::optional<AuxRatio> ratio, std::size_t per_target,
                                          const std::vector<Split>& expand) {
  const auto splits = assign_splits(target_stats);
  AuxSamplingPlan plan;
  plan.per_class_cap = per_class_cap;
  plan.per_target = per_target;
  plan.ratio = ratio ? *ratio : derive_ratio_partial(split_totals(target_stats, splits));
  for (std::size_t c = 0; c < target_stats.size(); ++c) {
    const Split s = splits.of(c);
    if (std::find(expand.begin(), expand.end(), s) != expand.end()) plan.expanded_targets[c] = s;
  }
  plan.validate();
  return plan;
}

/// Auxiliary samples drawn for one epoch.
struct EpochSample {
  std::vector<std::size_t> indices;       ///< rows of the auxiliary dataset
  std::vector<std::size_t> counts;        ///< per auxiliary class (index k for class L+k)
  std::vector<ClassId> empty_classes;     ///< attached classes with nothing to draw

  [[nodiscard]] std::uint64_t digest() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto i : indices) h = detail::splitmix64(h ^ i);
    return h;
  }
};

/// Draws min(available, cap) samples without replacement for every attached
/// auxiliary class, from a stream keyed by (seed, epoch, class).
inline EpochSample sample_epoch(const FeatureDataset& aux, const LabelSpace& space,
                                const AuxSamplingPlan& plan, std::uint64_t seed, std::size_t epoch) {
  plan.validate();
  const std::size_t L = space.num_target();
  const std::size_t K = space.num_auxiliary();
  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < aux.size(); ++i) {
    const ClassId y = aux.label(i);
    if (!space.is_auxiliary(y)) {
      throw DataError("auxiliary dataset contains non-auxiliary label " + std::to_string(y));
    }
    by_class[y - L].push_back(i);
  }
  const auto attached = plan.attached(space);
  const Rng base = Rng(seed).split("aux-sample").split(static_cast<std::uint64_t>(epoch));

  EpochSample out;
  out.counts.assign(K, 0);
  for (std::size_t k = 0; k < K; ++k) {
    if (!attached[k]) continue;
    auto& pool = by_class[k];
    if (pool.empty()) {
      out.empty_classes.push_back(L + k);
      continue;
    }
    const std::size_t take = std::min(pool.size(), plan.per_class_cap);
    Rng rng = base.split(static_cast<std::uint64_t>(L + k));
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.indices.push_back(pool[i]);
    }
    out.counts[k] = take;
  }
  return out;
}

}  // namespace tailext
