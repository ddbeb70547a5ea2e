#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailext/core.hpp"
#include "tailext/losses.hpp"
#include "tailext/rng.hpp"
#include "tailext/sampling.hpp"
#include "tailext/splits.hpp"

namespace tailext {

/// Dense affine map y = W x + b with W stored row-major (rows x cols).
struct Layer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  Layer() = default;
  Layer(std::size_t r, std::size_t c) : rows(r), cols(c), weights(r * c, 0.0), bias(r, 0.0) {}

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(weights).subspan(i * cols, cols);
  }
  [[nodiscard]] std::span<double> row(std::size_t i) {
    return std::span<double>(weights).subspan(i * cols, cols);
  }

  void apply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* w = weights.data() + i * cols;
      double acc = bias[i];
      for (std::size_t j = 0; j < cols; ++j) acc += w[j] * x[j];
      out[i] = acc;
    }
  }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Optimizer accumulators, one set per parameter tensor.
struct OptimizerSlots {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  friend bool operator==(const OptimizerSlots&, const OptimizerSlots&) = default;
};

/// Linear classifier over feature vectors, optionally preceded by one hidden
/// layer. Output rows are aligned with the class ids of `space`.
struct ClassifierState {
  std::size_t input_dim = 0;
  std::optional<Layer> hidden;
  Activation activation = Activation::relu;
  Layer output;
  LabelSpace space;
  bool masked = false;
  /// Training counts of the target classes; the split assignment used at
  /// evaluation time is derived from these.
  std::vector<std::size_t> target_counts;
  OptimizerSlots slots;

  [[nodiscard]] std::size_t num_classes() const noexcept { return output.rows; }
  [[nodiscard]] std::size_t feature_dim() const noexcept { return output.cols; }

  friend bool operator==(const ClassifierState&, const ClassifierState&) = default;
};

/// Zero-initialised classifier; a hidden layer, when requested, gets seeded
/// uniform weights in +-sqrt(6 / input_dim).
inline ClassifierState make_classifier(std::size_t input_dim, const LabelSpace& space,
                                       std::size_t hidden_dim, Activation activation,
                                       std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  ClassifierState s;
  s.input_dim = input_dim;
  s.activation = activation;
  s.space = space;
  std::size_t feat = input_dim;
  if (hidden_dim > 0) {
    Layer h(hidden_dim, input_dim);
    Rng rng = Rng(seed).split("hidden-init");
    const double bound = std::sqrt(6.0 / static_cast<double>(input_dim));
    for (auto& w : h.weights) w = rng.uniform(-bound, bound);
    s.hidden = std::move(h);
    feat = hidden_dim;
  }
  s.output = Layer(space.size(), feat);
  return s;
}

namespace detail {

inline void activate(Activation a, std::span<double> v) noexcept {
  if (a == Activation::relu) {
    for (auto& x : v) x = std::max(x, 0.0);
  }
}

}  // namespace detail

/// Intermediate values of a forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<double> hidden;  ///< post-activation hidden units (empty for linear models)
  std::vector<double> logits;
};

inline void forward(const ClassifierState& state, std::span<const double> features, ForwardCache& cache) {
  if (features.size() != state.input_dim) {
    throw DataError("feature vector of length " + std::to_string(features.size()) +
                    " but the classifier expects " + std::to_string(state.input_dim));
  }
  std::span<const double> x = features;
  if (state.hidden) {
    cache.hidden.resize(state.hidden->rows);
    state.hidden->apply(features, cache.hidden);
    detail::activate(state.activation, cache.hidden);
    x = cache.hidden;
  }
  cache.logits.resize(state.output.rows);
  state.output.apply(x, cache.logits);
}

/// Logits z = W f + b (through the hidden layer when present).
inline std::vector<double> forward(const ClassifierState& state, std::span<const double> features) {
  ForwardCache cache;
  forward(state, features, cache);
  return std::move(cache.logits);
}

/// Parameter gradients, shaped like the state's layers.
struct ParamGrads {
  std::optional<Layer> hidden;
  Layer output;

  explicit ParamGrads(const ClassifierState& s) : output(s.output.rows, s.output.cols) {
    if (s.hidden) hidden = Layer(s.hidden->rows, s.hidden->cols);
  }

  void zero() {
    std::fill(output.weights.begin(), output.weights.end(), 0.0);
    std::fill(output.bias.begin(), output.bias.end(), 0.0);
    if (hidden) {
      std::fill(hidden->weights.begin(), hidden->weights.end(), 0.0);
      std::fill(hidden->bias.begin(), hidden->bias.end(), 0.0);
    }
  }
};

/// Accumulates d loss / d params given d loss / d logits (chain rule through
/// the output layer and, when present, the hidden layer). `dz` may be sparse
/// in the sense that most entries are zero; `freeze_hidden` skips the hidden
/// layer entirely.
inline void backward(const ClassifierState& state, std::span<const double> features,
                     const ForwardCache& cache, std::span<const double> dz, ParamGrads& grads,
                     bool freeze_hidden = false) {
  const std::span<const double> x = state.hidden ? std::span<const double>(cache.hidden) : features;
  const std::size_t d = state.output.cols;
  std::vector<double> dx;
  const bool need_dx = state.hidden && !freeze_hidden;
  if (need_dx) dx.assign(d, 0.0);
  for (std::size_t i = 0; i < state.output.rows; ++i) {
    const double g = dz[i];
    if (g == 0.0) continue;
    grads.output.bias[i] += g;
    double* gw = grads.output.weights.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
    if (need_dx) {
      const double* w = state.output.weights.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dx[j] += g * w[j];
    }
  }
  if (!need_dx) return;
  const Layer& h = *state.hidden;
  for (std::size_t k = 0; k < h.rows; ++k) {
    double g = dx[k];
    if (state.activation == Activation::relu && cache.hidden[k] <= 0.0) g = 0.0;
    if (g == 0.0) continue;
    grads.hidden->bias[k] += g;
    double* gw = grads.hidden->weights.data() + k * h.cols;
    for (std::size_t j = 0; j < h.cols; ++j) gw[j] += g * features[j];
  }
}

/// Argmax over the state's logits; ties go to the lowest class id.
inline ClassId predict(const ClassifierState& state, std::span<const double> features) {
  const auto z = forward(state, features);
  return static_cast<ClassId>(std::max_element(z.begin(), z.end()) - z.begin());
}

/// Keeps the rows of the L target classes and drops the auxiliary ones. The
/// input state is not modified.
inline ClassifierState mask_classifier(const ClassifierState& state) {
  const std::size_t L = state.space.num_target();
  if (state.output.rows < L) throw DataError("classifier has fewer rows than target classes");
  ClassifierState out;
  out.input_dim = state.input_dim;
  out.hidden = state.hidden;
  out.activation = state.activation;
  out.output = Layer(L, state.output.cols);
  std::copy_n(state.output.weights.begin(), L * state.output.cols, out.output.weights.begin());
  std::copy_n(state.output.bias.begin(), L, out.output.bias.begin());
  std::map<ClassId, std::string> names;
  for (const auto& [id, name] : state.space.class_names()) {
    if (id < L) names.emplace(id, name);
  }
  out.space = LabelSpace(L, {}, std::move(names));
  out.masked = true;
  out.target_counts = state.target_counts;
  return out;
}

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

namespace detail {

inline void optimizer_step(ClassifierState& state, ParamGrads& grads, const RunConfig& cfg,
                           bool freeze_hidden) {
  std::vector<std::pair<std::vector<double>*, std::vector<double>*>> tensors;
  tensors.emplace_back(&state.output.weights, &grads.output.weights);
  tensors.emplace_back(&state.output.bias, &grads.output.bias);
  if (state.hidden && !freeze_hidden) {
    tensors.emplace_back(&state.hidden->weights, &grads.hidden->weights);
    tensors.emplace_back(&state.hidden->bias, &grads.hidden->bias);
  }
  auto& slots = state.slots;
  if (slots.first.size() != tensors.size()) {
    slots.first.assign(tensors.size(), {});
    slots.second.assign(tensors.size(), {});
  }
  ++slots.step;
  const double lr = cfg.learning_rate;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto& p = *tensors[t].first;
    const auto& g = *tensors[t].second;
    auto& m = slots.first[t];
    if (m.size() != p.size()) m.assign(p.size(), 0.0);
    if (cfg.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + cfg.weight_decay * p[i];
        m[i] = cfg.momentum * m[i] + gi;
        p[i] -= lr * m[i];
      }
    } else {
      auto& v = slots.second[t];
      if (v.size() != p.size()) v.assign(p.size(), 0.0);
      const double b1 = cfg.adam_beta1;
      const double b2 = cfg.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(slots.step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(slots.step));
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
        p[i] -= lr * (update + cfg.weight_decay * p[i]);
      }
    }
  }
}

/// Restriction of a label space to the classes that have samples in the
/// current epoch: all targets plus the auxiliary classes with non-zero count.
struct ActiveClasses {
  LabelSpace space;
  ClassStats stats;
  std::vector<ClassId> to_full;  ///< active index -> full class id
};

inline ActiveClasses active_classes(const LabelSpace& space, std::span<const std::size_t> target_counts,
                                    std::span<const std::size_t> aux_counts) {
  const std::size_t L = space.num_target();
  ActiveClasses a;
  std::vector<std::size_t> counts(target_counts.begin(), target_counts.end());
  std::vector<ClassId> neighbors;
  a.to_full.resize(L);
  std::iota(a.to_full.begin(), a.to_full.end(), ClassId{0});
  for (std::size_t k = 0; k < aux_counts.size(); ++k) {
    if (aux_counts[k] == 0) continue;
    counts.push_back(aux_counts[k]);
    neighbors.push_back(space.neighbor_of(L + k));
    a.to_full.push_back(L + k);
  }
  a.space = LabelSpace(L, std::move(neighbors));
  a.stats = ClassStats(std::move(counts));
  return a;
}

}  // namespace detail

/// One row per epoch of a training run.
struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::size_t target_samples = 0;
  std::size_t aux_samples = 0;
  std::size_t active_classes = 0;
  std::uint64_t sample_digest = 0;
  std::vector<ClassId> empty_aux_classes;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainLog {
  LossKind loss = LossKind::bal_ce;
  std::optional<AuxSamplingPlan> plan;
  std::vector<EpochLog> epochs;
  bool linear_probe = false;
  std::vector<EpochLog> probe_epochs;
};

struct TrainResult {
  ClassifierState state;
  TrainLog log;
};

namespace detail {

/// Mini-batch training loop shared by `train` and `retrain_classifier`.
/// Each epoch the caller supplies the auxiliary rows to mix in.
template <typename EpochAux>
std::vector<EpochLog> run_epochs(ClassifierState& state, const FeatureDataset& target,
                                 const FeatureDataset* aux, const LabelSpace& space,
                                 std::span<const std::size_t> target_counts, const RunConfig& cfg,
                                 LossKind loss_kind, bool freeze_hidden, std::string_view stream,
                                 EpochAux&& epoch_aux) {
  std::vector<EpochLog> logs;
  ParamGrads grads(state);
  ForwardCache cache;
  std::vector<double> dz_full(state.output.rows, 0.0);
  std::vector<double> z_active;
  const Rng shuffle_base = Rng(cfg.seed).split(stream).split("shuffle");

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochSample sample = epoch_aux(epoch);
    const auto active = active_classes(space, target_counts, sample.counts);
    const std::size_t n_active = active.to_full.size();

    // Row references: values < target.size() index the target set, the rest
    // index the epoch's auxiliary draw.
    std::vector<std::size_t> order(target.size() + sample.indices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = shuffle_base.split(static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<std::size_t>(order));

    // full class id -> active index
    std::vector<std::size_t> to_active(space.size(), SIZE_MAX);
    for (std::size_t a = 0; a < n_active; ++a) to_active[active.to_full[a]] = a;

    LossSpec spec{loss_kind, &active.stats, &active.space, cfg.lambda_s};
    double loss_sum = 0.0;
    z_active.resize(n_active);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.zero();
      for (std::size_t r = start; r < end; ++r) {
        const std::size_t ref = order[r];
        const bool is_target = ref < target.size();
        const std::size_t row = is_target ? ref : sample.indices[ref - target.size()];
        const FeatureDataset& ds = is_target ? target : *aux;
        const auto f = ds.features(row);
        forward(state, f, cache);
        for (std::size_t a = 0; a < n_active; ++a) z_active[a] = cache.logits[active.to_full[a]];
        const auto value = sample_loss<double>(z_active, to_active[ds.label(row)], spec);
        loss_sum += value.loss;
        std::fill(dz_full.begin(), dz_full.end(), 0.0);
        for (std::size_t a = 0; a < n_active; ++a) dz_full[active.to_full[a]] = value.grad[a];
        backward(state, f, cache, dz_full, grads, freeze_hidden);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      auto scale_layer = [scale](Layer& l) {
        for (auto& g : l.weights) g *= scale;
        for (auto& g : l.bias) g *= scale;
      };
      scale_layer(grads.output);
      if (grads.hidden) scale_layer(*grads.hidden);
      optimizer_step(state, grads, cfg, freeze_hidden);
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(order.size());
    log.target_samples = target.size();
    log.aux_samples = sample.indices.size();
    log.active_classes = n_active;
    log.sample_digest = sample.digest();
    log.empty_aux_classes = sample.empty_classes;
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace detail

/// Retrains the classifier rows of the target classes on `target` alone with
/// balanced softmax, discarding the trained output layer. A hidden layer, if
/// any, stays frozen. This is the linear-probing alternative to masking.
inline ClassifierState retrain_classifier(const ClassifierState& trained, const FeatureDataset& target,
                                          const RunConfig& cfg, std::vector<EpochLog>* logs = nullptr) {
  const std::size_t L = trained.space.num_target();
  ClassifierState s = mask_classifier(trained);
  s.masked = false;
  s.output = Layer(L, trained.output.cols);
  s.slots = {};
  const auto counts = target.class_counts(L);
  const FeatureDataset empty;
  auto result = detail::run_epochs(s, target, &empty, s.space, counts, cfg, LossKind::bal_ce,
                                   /*freeze_hidden=*/true, "linear-probe",
                                   [](std::size_t) { return EpochSample{}; });
  s.slots = {};
  if (logs != nullptr) *logs = std::move(result);
  return s;
}

/// Trains on the target set mixed with per-epoch auxiliary draws. Uses the
/// neighbor-silencing loss when the label space has auxiliary classes and
/// balanced softmax otherwise. Class counts seen by the loss are the counts of
/// the epoch's mixed set.
///
/// `plan` defaults to every target with auxiliaries attached under the ratio
/// of `cfg` (derived from split totals when unset).
inline TrainResult train(const FeatureDataset& target, const FeatureDataset& aux, const LabelSpace& space,
                         const RunConfig& cfg, std::optional<AuxSamplingPlan> plan = std::nullopt) {
  cfg.validate();
  if (target.empty()) throw DataError("empty target dataset");
  if (aux.feature_dim() != target.feature_dim()) {
    throw DataError("target and auxiliary datasets differ in feature dimension");
  }
  target.validate(space);
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!space.is_target(target.label(i))) {
      throw DataError("target dataset contains auxiliary label " + std::to_string(target.label(i)));
    }
  }
  aux.validate(space);

  const std::size_t L = space.num_target();
  const auto target_counts = target.class_counts(L);
  const ClassStats target_stats(target_counts);  // throws on a target class with no samples

  TrainResult result;
  result.state = make_classifier(target.feature_dim(), space, cfg.hidden_dim, cfg.activation, cfg.seed);
  result.state.target_counts = target_counts;
  const bool has_aux = space.num_auxiliary() > 0;
  result.log.loss = has_aux ? LossKind::ns_ce : LossKind::bal_ce;
  if (has_aux) {
    if (!plan) {
      plan = make_sampling_plan(target_stats, cfg.per_class_cap, cfg.aux_ratio, cfg.aux_per_target,
                                {Split::many, Split::medium, Split::few});
    }
    result.log.plan = plan;
  }

  result.log.epochs = detail::run_epochs(
      result.state, target, &aux, space, target_counts, cfg, result.log.loss, false, "train",
      [&](std::size_t epoch) {
        return has_aux ? sample_epoch(aux, space, *plan, cfg.seed, epoch) : EpochSample{};
      });

  if (cfg.linear_probe) {
    result.log.linear_probe = true;
    result.state = retrain_classifier(result.state, target, cfg, &result.log.probe_epochs);
  }
  return result;
}

}  // namespace tailext
