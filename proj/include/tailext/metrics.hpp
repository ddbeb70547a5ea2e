#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tailext/core.hpp"
#include "tailext/losses.hpp"
#include "tailext/model.hpp"
#include "tailext/splits.hpp"

namespace tailext {

/// Top-1 accuracy (percent) overall and per split. A split without test
/// samples is absent rather than zero; so is the gap when either end is.
struct EvalReport {
  double overall_acc = 0.0;
  std::optional<double> many_acc;
  std::optional<double> med_acc;
  std::optional<double> few_acc;
  std::optional<double> head_tail_gap;
  std::optional<BalancedError> balanced_error;
  std::size_t num_test = 0;
  std::size_t num_many = 0;
  std::size_t num_med = 0;
  std::size_t num_few = 0;
  std::size_t num_classes_scored = 0;  ///< width of the argmax (L, or L+K unmasked)
  bool masked = false;
};

/// Accuracy report from (prediction, label) pairs; `splits` tags test labels.
inline EvalReport score_predictions(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                                    const SplitAssignment& splits) {
  if (predictions.size() != labels.size()) throw DataError("predictions and labels differ in length");
  if (labels.empty()) throw DataError("empty test set");
  std::size_t hit[3] = {0, 0, 0};
  std::size_t tot[3] = {0, 0, 0};
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= splits.size()) {
      throw DataError("test label " + std::to_string(labels[i]) + " has no split assignment");
    }
    const auto s = static_cast<std::size_t>(splits.of(labels[i]));
    const bool ok = predictions[i] == labels[i];
    ++tot[s];
    hit[s] += ok;
    hits += ok;
  }
  auto pct = [](std::size_t h, std::size_t t) -> std::optional<double> {
    if (t == 0) return std::nullopt;
    return 100.0 * static_cast<double>(h) / static_cast<double>(t);
  };
  EvalReport r;
  r.num_test = labels.size();
  r.overall_acc = *pct(hits, labels.size());
  r.many_acc = pct(hit[0], tot[0]);
  r.med_acc = pct(hit[1], tot[1]);
  r.few_acc = pct(hit[2], tot[2]);
  r.num_many = tot[0];
  r.num_med = tot[1];
  r.num_few = tot[2];
  if (r.many_acc && r.few_acc) r.head_tail_gap = *r.many_acc - *r.few_acc;
  try {
    r.balanced_error = balanced_error(predictions, labels, splits.size());
  } catch (const DataError&) {
    r.balanced_error = std::nullopt;  // some class has no test samples
  }
  return r;
}

/// Evaluates `state` on `test`. With `mask` set, auxiliary rows are dropped
/// first and predictions range over the target classes only.
inline EvalReport evaluate(const ClassifierState& state, const FeatureDataset& test,
                           const SplitAssignment& splits, bool mask) {
  const ClassifierState* s = &state;
  ClassifierState masked;
  if (mask && !state.masked) {
    masked = mask_classifier(state);
    s = &masked;
  }
  std::vector<ClassId> predictions;
  predictions.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) predictions.push_back(predict(*s, test.features(i)));
  auto report = score_predictions(predictions, test.labels(), splits);
  report.masked = s->masked;
  report.num_classes_scored = s->num_classes();
  return report;
}

}  // namespace tailext
