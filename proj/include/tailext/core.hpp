#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tailext/error.hpp"

namespace tailext {

using ClassId = std::size_t;

// ---------------------------------------------------------------------------
// LabelSpace
// ---------------------------------------------------------------------------

/// Partition of class ids into L target classes [0, L) and K auxiliary
/// classes [L, L+K), together with the neighbor-of relation that records which
/// target each auxiliary class was derived from.
///
/// Immutable after construction.
class LabelSpace {
 public:
  LabelSpace() = default;

  /// `neighbor_of[k]` is the target id that auxiliary class `L + k` belongs to.
  LabelSpace(std::size_t num_target, std::vector<ClassId> neighbor_of,
             std::map<ClassId, std::string> class_names = {})
      : num_target_(num_target),
        neighbor_of_(std::move(neighbor_of)),
        class_names_(std::move(class_names)) {
    if (num_target_ == 0) throw ConfigError("label space needs at least one target class");
    aux_of_target_.resize(num_target_);
    for (std::size_t k = 0; k < neighbor_of_.size(); ++k) {
      const ClassId t = neighbor_of_[k];
      if (t >= num_target_) {
        throw ConfigError("auxiliary class " + std::to_string(num_target_ + k) +
                          " points at target " + std::to_string(t) + " which is out of range");
      }
      aux_of_target_[t].push_back(num_target_ + k);
    }
    for (const auto& [id, name] : class_names_) {
      if (id >= size()) throw ConfigError("class name given for unknown id " + std::to_string(id));
    }
  }

  [[nodiscard]] std::size_t num_target() const noexcept { return num_target_; }
  [[nodiscard]] std::size_t num_auxiliary() const noexcept { return neighbor_of_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return num_target_ + neighbor_of_.size(); }

  [[nodiscard]] bool is_target(ClassId c) const noexcept { return c < num_target_; }
  [[nodiscard]] bool is_auxiliary(ClassId c) const noexcept { return c >= num_target_ && c < size(); }
  [[nodiscard]] bool contains(ClassId c) const noexcept { return c < size(); }

  /// Target the auxiliary class `aux` was queried from.
  [[nodiscard]] ClassId neighbor_of(ClassId aux) const {
    if (!is_auxiliary(aux)) throw ConfigError("class " + std::to_string(aux) + " is not auxiliary");
    return neighbor_of_[aux - num_target_];
  }

  /// Auxiliary classes attached to target `t`, ascending.
  [[nodiscard]] std::span<const ClassId> auxiliaries_of(ClassId t) const {
    if (!is_target(t)) throw ConfigError("class " + std::to_string(t) + " is not a target");
    return aux_of_target_[t];
  }

  /// True when one class is auxiliary and the other is the target it was
  /// derived from. Symmetric by construction.
  [[nodiscard]] bool are_neighbors(ClassId a, ClassId b) const noexcept {
    if (is_auxiliary(a) && is_target(b)) return neighbor_of_[a - num_target_] == b;
    if (is_auxiliary(b) && is_target(a)) return neighbor_of_[b - num_target_] == a;
    return false;
  }

  [[nodiscard]] const std::vector<ClassId>& neighbor_table() const noexcept { return neighbor_of_; }
  [[nodiscard]] const std::map<ClassId, std::string>& class_names() const noexcept {
    return class_names_;
  }
  [[nodiscard]] std::optional<std::string> name_of(ClassId c) const {
    if (auto it = class_names_.find(c); it != class_names_.end()) return it->second;
    return std::nullopt;
  }

  friend bool operator==(const LabelSpace& a, const LabelSpace& b) {
    return a.num_target_ == b.num_target_ && a.neighbor_of_ == b.neighbor_of_ &&
           a.class_names_ == b.class_names_;
  }

 private:
  std::size_t num_target_ = 0;
  std::vector<ClassId> neighbor_of_;
  std::map<ClassId, std::string> class_names_;
  std::vector<std::vector<ClassId>> aux_of_target_;
};

/// Builds a label space from explicit (auxiliary id, target id) pairs. The
/// auxiliary ids must be exactly L, L+1, ..., L+K-1 in any order.
inline LabelSpace build_label_space(std::size_t num_target,
                                    std::span<const std::pair<ClassId, ClassId>> neighbor_pairs,
                                    std::map<ClassId, std::string> class_names = {}) {
  const std::size_t k = neighbor_pairs.size();
  std::vector<ClassId> table(k, 0);
  std::vector<bool> seen(k, false);
  for (const auto& [aux, target] : neighbor_pairs) {
    if (aux < num_target || aux >= num_target + k) {
      throw ConfigError("auxiliary id " + std::to_string(aux) + " is not in [" +
                        std::to_string(num_target) + ", " + std::to_string(num_target + k) + ")");
    }
    if (seen[aux - num_target]) throw ConfigError("duplicate auxiliary id " + std::to_string(aux));
    if (target >= num_target) {
      throw ConfigError("target id " + std::to_string(target) + " out of range for L=" +
                        std::to_string(num_target));
    }
    seen[aux - num_target] = true;
    table[aux - num_target] = target;
  }
  return LabelSpace(num_target, std::move(table), std::move(class_names));
}

inline LabelSpace build_label_space(
    std::size_t num_target, std::initializer_list<std::pair<ClassId, ClassId>> neighbor_pairs) {
  const std::vector<std::pair<ClassId, ClassId>> v(neighbor_pairs);
  return build_label_space(num_target, std::span<const std::pair<ClassId, ClassId>>(v));
}

// ---------------------------------------------------------------------------
// ClassStats
// ---------------------------------------------------------------------------

/// Per-class training frequencies n_y. Every count must be at least one since
/// the balanced losses take log n_y.
class ClassStats {
 public:
  ClassStats() = default;

  explicit ClassStats(std::vector<std::size_t> counts) : counts_(std::move(counts)) {
    log_counts_.reserve(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i] == 0) throw DataError("class " + std::to_string(i) + " has zero samples");
      log_counts_.push_back(std::log(static_cast<double>(counts_[i])));
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return counts_.size(); }
  [[nodiscard]] bool empty() const noexcept { return counts_.empty(); }
  [[nodiscard]] std::size_t count(ClassId c) const { return counts_.at(c); }
  [[nodiscard]] std::span<const std::size_t> counts() const noexcept { return counts_; }
  [[nodiscard]] std::span<const double> log_counts() const noexcept { return log_counts_; }
  [[nodiscard]] std::size_t total() const noexcept {
    std::size_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  friend bool operator==(const ClassStats& a, const ClassStats& b) { return a.counts_ == b.counts_; }

 private:
  std::vector<std::size_t> counts_;
  std::vector<double> log_counts_;
};

/// max(counts) / min(counts).
inline double imbalance_factor(const ClassStats& stats) {
  if (stats.empty()) throw DataError("imbalance factor of empty class statistics");
  const auto [lo, hi] = std::minmax_element(stats.counts().begin(), stats.counts().end());
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

// ---------------------------------------------------------------------------
// FeatureDataset
// ---------------------------------------------------------------------------

enum class Provenance { synthetic, ingested };

inline const char* to_string(Provenance p) noexcept {
  return p == Provenance::synthetic ? "synthetic" : "ingested";
}

/// Labeled feature vectors of a shared dimension, stored row-major.
class FeatureDataset {
 public:
  FeatureDataset() = default;
  explicit FeatureDataset(std::size_t feature_dim, Provenance provenance = Provenance::synthetic)
      : feature_dim_(feature_dim), provenance_(provenance) {
    if (feature_dim_ == 0) throw DataError("feature dimension must be positive");
  }

  void add(std::span<const double> features, ClassId label, std::string id = {}) {
    if (features.size() != feature_dim_) {
      throw DataError("feature vector of length " + std::to_string(features.size()) +
                      " in a dataset of dimension " + std::to_string(feature_dim_));
    }
    for (double v : features) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
    if (id.empty()) id = std::to_string(labels_.size());
    features_.insert(features_.end(), features.begin(), features.end());
    labels_.push_back(label);
    ids_.push_back(std::move(id));
  }

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] bool empty() const noexcept { return labels_.empty(); }
  [[nodiscard]] std::size_t feature_dim() const noexcept { return feature_dim_; }
  [[nodiscard]] Provenance provenance() const noexcept { return provenance_; }

  [[nodiscard]] std::span<const double> features(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * feature_dim_, feature_dim_);
  }
  [[nodiscard]] ClassId label(std::size_t i) const { return labels_.at(i); }
  [[nodiscard]] const std::string& id(std::size_t i) const { return ids_.at(i); }
  [[nodiscard]] std::span<const ClassId> labels() const noexcept { return labels_; }

  /// Throws unless every label is a valid class of `space`.
  void validate(const LabelSpace& space) const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (!space.contains(labels_[i])) {
        throw DataError("sample '" + ids_[i] + "' has label " + std::to_string(labels_[i]) +
                        " outside the label space of size " + std::to_string(space.size()));
      }
    }
  }

  /// Per-class sample counts over `num_classes` classes (zeros allowed).
  [[nodiscard]] std::vector<std::size_t> class_counts(std::size_t num_classes) const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto y : labels_) {
      if (y >= num_classes) throw DataError("label " + std::to_string(y) + " out of range");
      ++counts[y];
    }
    return counts;
  }

  friend bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
    return a.feature_dim_ == b.feature_dim_ && a.features_ == b.features_ &&
           a.labels_ == b.labels_ && a.ids_ == b.ids_;
  }

 private:
  std::size_t feature_dim_ = 0;
  Provenance provenance_ = Provenance::synthetic;
  std::vector<double> features_;
  std::vector<ClassId> labels_;
  std::vector<std::string> ids_;
};

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adamw };
enum class Activation { identity, relu };

/// Head/medium/tail auxiliary-category multipliers. Real-valued so that
/// presets such as 1:0.5:1 are expressible.
struct AuxRatio {
  double head = 1.0;
  double medium = 1.0;
  double tail = 3.0;
  friend bool operator==(const AuxRatio&, const AuxRatio&) = default;
};

/// Everything a training run depends on besides its data. Identical configs on
/// identical inputs produce bit-identical outputs.
struct RunConfig {
  std::uint64_t seed = 0;

  // loss
  double lambda_s = 0.1;

  // curation keep band
  double gamma1 = 0.7;
  double gamma2 = 0.98;

  // auxiliary sampling; an unset ratio means "derive from split totals"
  std::size_t per_class_cap = 50;
  std::optional<AuxRatio> aux_ratio;
  std::size_t aux_per_target = 5;

  // optimisation
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;

  // model
  std::size_t hidden_dim = 0;
  Activation activation = Activation::relu;

  // classifier retraining on target data instead of direct masking
  bool linear_probe = false;

  /// Throws ConfigError on invalid values; returns human-readable warnings for
  /// values that are allowed but unusual.
  std::vector<std::string> validate() const {
    std::vector<std::string> warnings;
    if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s)) throw ConfigError("lambda_s must be >= 0");
    if (lambda_s > 1.0) {
      warnings.push_back("lambda_s > 1 amplifies neighbor pairs instead of silencing them");
    }
    if (!(gamma1 >= 0.0 && gamma1 < gamma2 && gamma2 <= 1.0)) {
      throw ConfigError("gamma thresholds must satisfy 0 <= gamma1 < gamma2 <= 1");
    }
    if (per_class_cap == 0) throw ConfigError("per-class cap must be at least 1");
    if (aux_ratio && (aux_ratio->head < 0 || aux_ratio->medium < 0 || aux_ratio->tail < 0)) {
      throw ConfigError("auxiliary ratio entries must be non-negative");
    }
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
    return warnings;
  }
};

}  // namespace tailext
