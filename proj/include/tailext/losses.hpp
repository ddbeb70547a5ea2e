#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tailext/core.hpp"

namespace tailext {

/// Loss value together with its gradient with respect to the logits.
template <std::floating_point T>
struct LossValue {
  T loss{};
  std::vector<T> grad;
};

namespace detail {

template <std::floating_point T>
void check_logits(std::span<const T> z, ClassId y) {
  if (z.empty()) throw DataError("empty logit vector");
  if (y >= z.size()) {
    throw DataError("class " + std::to_string(y) + " outside a logit vector of length " +
                    std::to_string(z.size()));
  }
  for (T v : z) {
    if (!std::isfinite(v)) throw DataError("non-finite logit");
  }
}

}  // namespace detail

/// Pairwise-weighted balanced cross-entropy:
///
///   loss = log(1 + sum_{j != y} w_j * exp(a_j - a_y)),   a_j = z_j + offset_j
///
/// `offset` holds log n_j (all zeros gives plain cross-entropy) and `weight(j)`
/// returns the pair weight between the true class `y` and class `j`. All
/// exponentials are taken after subtracting the largest participating a_j.
///
/// The gradient is d loss / d z_j = p_j for j != y and p_y - 1 at the true
/// class, where p is the weighted softmax w_j e^{a_j} / D with w_y = 1.
template <std::floating_point T, typename WeightFn>
LossValue<T> weighted_balanced_ce(std::span<const T> z, ClassId y, std::span<const double> offset,
                                  WeightFn&& weight) {
  detail::check_logits(z, y);
  if (offset.size() != z.size()) {
    throw DataError("logit vector has length " + std::to_string(z.size()) +
                    " but class statistics cover " + std::to_string(offset.size()) + " classes");
  }
  const std::size_t n = z.size();
  std::vector<T> a(n);
  std::vector<T> w(n);
  T shift = static_cast<T>(z[y] + offset[y]);
  for (std::size_t j = 0; j < n; ++j) {
    a[j] = static_cast<T>(z[j] + offset[j]);
    w[j] = j == y ? T(1) : static_cast<T>(weight(j));
    if (w[j] > T(0)) shift = std::max(shift, a[j]);
  }

  LossValue<T> out;
  out.grad.assign(n, T(0));
  T denom = T(0);
  for (std::size_t j = 0; j < n; ++j) {
    if (w[j] > T(0)) {
      out.grad[j] = w[j] * std::exp(a[j] - shift);
      denom += out.grad[j];
    }
  }
  // log(D / e^{a_y}) with D measured relative to the shift.
  out.loss = std::log(denom) - (a[y] - shift);
  for (auto& g : out.grad) g /= denom;
  out.grad[y] -= T(1);
  return out;
}

/// Standard softmax cross-entropy.
template <std::floating_point T>
LossValue<T> softmax_ce(std::span<const T> z, ClassId y) {
  const std::vector<double> zeros(z.size(), 0.0);
  return weighted_balanced_ce<T>(z, y, zeros, [](ClassId) { return T(1); });
}

/// Balanced softmax cross-entropy: -log(n_y e^{z_y} / sum_j n_j e^{z_j}).
template <std::floating_point T>
LossValue<T> bal_ce(std::span<const T> z, ClassId y, const ClassStats& stats) {
  return weighted_balanced_ce<T>(z, y, stats.log_counts(), [](ClassId) { return T(1); });
}

/// Balanced softmax cross-entropy over the merged target + auxiliary label
/// space. The auxiliary classes simply extend the normaliser, so this is the
/// same computation as `bal_ce` on a longer vector.
template <std::floating_point T>
LossValue<T> bal_ce_merged(std::span<const T> z, ClassId y, const ClassStats& stats) {
  return bal_ce<T>(z, y, stats);
}

/// Pair weight between classes `a` and `b`: `lambda_s` for a target and one of
/// its own auxiliary neighbors (either order), 1 otherwise. Two auxiliary
/// classes of the same target are not silenced against each other.
inline double silence_weight(const LabelSpace& space, ClassId a, ClassId b, double lambda_s) noexcept {
  return space.are_neighbors(a, b) ? lambda_s : 1.0;
}

/// Neighbor-silencing balanced cross-entropy:
///
///   log(1 + sum_{j != y} lambda_yj * exp(log n_j - log n_y + z_j - z_y))
///
/// The pair weights come from `silence_weight`; they are evaluated on demand
/// and never stored as a dense matrix.
template <std::floating_point T>
LossValue<T> ns_ce(std::span<const T> z, ClassId y, const ClassStats& stats, const LabelSpace& space,
                   double lambda_s) {
  if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s)) throw ConfigError("lambda_s must be >= 0");
  if (space.size() != z.size()) {
    throw DataError("logit vector has length " + std::to_string(z.size()) +
                    " but the label space has " + std::to_string(space.size()) + " classes");
  }
  return weighted_balanced_ce<T>(z, y, stats.log_counts(), [&](ClassId j) {
    return static_cast<T>(silence_weight(space, y, j, lambda_s));
  });
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

enum class LossKind { cross_entropy, bal_ce, bal_ce_merged, ns_ce };

inline const char* to_string(LossKind k) noexcept {
  switch (k) {
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::bal_ce: return "bal_ce";
    case LossKind::bal_ce_merged: return "bal_ce_merged";
    case LossKind::ns_ce: return "ns_ce";
  }
  return "?";
}

/// Which loss to apply and what it needs. `stats` is unused by
/// cross_entropy; `space` and `lambda_s` only by ns_ce.
struct LossSpec {
  LossKind kind = LossKind::bal_ce;
  const ClassStats* stats = nullptr;
  const LabelSpace* space = nullptr;
  double lambda_s = 1.0;
};

template <std::floating_point T>
LossValue<T> sample_loss(std::span<const T> z, ClassId y, const LossSpec& spec) {
  auto need_stats = [&]() -> const ClassStats& {
    if (spec.stats == nullptr) throw ConfigError(std::string(to_string(spec.kind)) + " needs class statistics");
    return *spec.stats;
  };
  switch (spec.kind) {
    case LossKind::cross_entropy: return softmax_ce<T>(z, y);
    case LossKind::bal_ce: return bal_ce<T>(z, y, need_stats());
    case LossKind::bal_ce_merged: return bal_ce_merged<T>(z, y, need_stats());
    case LossKind::ns_ce:
      if (spec.space == nullptr) throw ConfigError("ns_ce needs a label space");
      return ns_ce<T>(z, y, need_stats(), *spec.space, spec.lambda_s);
  }
  throw ConfigError("unknown loss kind");
}

template <std::floating_point T>
struct ScoredSample {
  std::span<const T> logits;
  ClassId label;
};

template <std::floating_point T>
struct BatchLoss {
  T mean_loss{};
  std::vector<std::vector<T>> grads;  ///< per-sample gradients, aligned with the input
};

/// Mean loss over a batch. Gradients are those of each sample's own loss, not
/// of the mean; callers scale by 1/size when they need the latter.
template <std::floating_point T>
BatchLoss<T> batch_loss(std::span<const ScoredSample<T>> batch, const LossSpec& spec) {
  if (batch.empty()) throw DataError("empty batch");
  BatchLoss<T> out;
  out.grads.reserve(batch.size());
  T sum = T(0);
  for (const auto& s : batch) {
    auto v = sample_loss<T>(s.logits, s.label, spec);
    sum += v.loss;
    out.grads.push_back(std::move(v.grad));
  }
  out.mean_loss = sum / static_cast<T>(batch.size());
  return out;
}

// ---------------------------------------------------------------------------
// Balanced error
// ---------------------------------------------------------------------------

/// Per-class error rate P(prediction != y | y) aggregated over classes, both
/// as the plain sum over classes and as the class-mean.
struct BalancedError {
  double sum = 0.0;
  double mean = 0.0;
};

inline BalancedError balanced_error(std::span<const ClassId> predictions,
                                    std::span<const ClassId> labels, std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw DataError("predictions and labels differ in length");
  }
  if (num_classes == 0) throw DataError("balanced error over zero classes");
  std::vector<std::size_t> total(num_classes, 0);
  std::vector<std::size_t> wrong(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw DataError("label out of range in balanced error");
    ++total[labels[i]];
    if (predictions[i] != labels[i]) ++wrong[labels[i]];
  }
  BalancedError be;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (total[c] == 0) {
      throw DataError("class " + std::to_string(c) + " has no test samples");
    }
    be.sum += static_cast<double>(wrong[c]) / static_cast<double>(total[c]);
  }
  be.mean = be.sum / static_cast<double>(num_classes);
  return be;
}

}  // namespace tailext
