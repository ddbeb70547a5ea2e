#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tailext/core.hpp"
#include "tailext/io.hpp"
#include "tailext/metrics.hpp"
#include "tailext/model.hpp"
#include "tailext/parallel.hpp"
#include "tailext/rng.hpp"
#include "tailext/sampling.hpp"
#include "tailext/splits.hpp"
#include "tailext/synth.hpp"

namespace tailext {

/// Seed of repetition `i` of an experiment rooted at `base`.
inline std::uint64_t repetition_seed(std::uint64_t base, std::size_t i) {
  return Rng(base).split("repetition").split(static_cast<std::uint64_t>(i))();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Granularity pilot
// ---------------------------------------------------------------------------

struct PilotSpec {
  HierarchySpec hierarchy{};
  CountProfile profile{};  ///< `ratio` is overridden by each grid point
  std::vector<std::size_t> superclasses{5, 25};
  std::vector<double> ratios{1.0, 0.01};
  std::size_t seeds = 5;

  void validate() const {
    if (superclasses.empty() || ratios.empty()) throw ConfigError("pilot grid is empty");
    if (seeds == 0) throw ConfigError("pilot needs at least one seed");
    if (profile.kind != ProfileKind::exponential) throw ConfigError("pilot grid varies the exponential ratio");
    for (double r : ratios) {
      CountProfile p = profile;
      p.ratio = r;
      p.validate();
    }
    for (auto s : superclasses) {
      HierarchySpec h = hierarchy;
      h.num_superclasses = s;
      h.num_classes = profile.num_classes;
      h.validate();
    }
  }
};

struct PilotRow {
  std::size_t superclasses = 0;
  double ratio = 0.0;
  std::vector<double> gaps;  ///< one per seed, in seed order
  MeanStd gap;
};

struct PilotResult {
  std::vector<PilotRow> rows;  ///< superclass-major, then ratio, in grid order
};

/// Trains a balanced-softmax classifier for every (S, ratio, seed) grid point
/// and records the many-minus-few accuracy gap. Splits come from the most
/// imbalanced profile in the grid so that balanced grid points are scored on
/// the same class groups.
inline PilotResult run_pilot(const PilotSpec& spec, const RunConfig& train_cfg, std::uint64_t seed,
                             std::size_t jobs = 1) {
  spec.validate();
  train_cfg.validate();
  CountProfile ref = spec.profile;
  ref.ratio = *std::min_element(spec.ratios.begin(), spec.ratios.end());
  const auto ref_splits = assign_splits(make_counts(ref));

  struct Point {
    std::size_t row;
    std::size_t s;
    double ratio;
    std::size_t rep;
  };
  std::vector<Point> points;
  PilotResult result;
  for (auto s : spec.superclasses) {
    for (double r : spec.ratios) {
      result.rows.push_back(PilotRow{s, r, {}, {}});
      for (std::size_t rep = 0; rep < spec.seeds; ++rep) points.push_back(Point{result.rows.size() - 1, s, r, rep});
    }
  }
  const auto gaps = bounded_map(points.size(), jobs, [&](std::size_t i) {
    const auto& p = points[i];
    CountProfile prof = spec.profile;
    prof.ratio = p.ratio;
    HierarchySpec hs = spec.hierarchy;
    hs.num_superclasses = p.s;
    hs.num_classes = prof.num_classes;
    const std::uint64_t rs = repetition_seed(seed, p.rep);
    const auto h = make_hierarchy(hs, make_counts(prof), rs);
    RunConfig cfg = train_cfg;
    cfg.seed = rs;
    const LabelSpace space(hs.num_classes, {});
    const auto trained = train(h.train, FeatureDataset(hs.feature_dim), space, cfg);
    const auto report = evaluate(trained.state, h.test, ref_splits, false);
    return report.head_tail_gap.value_or(0.0);
  });
  for (std::size_t i = 0; i < points.size(); ++i) result.rows[points[i].row].gaps.push_back(gaps[i]);
  for (auto& row : result.rows) row.gap = mean_std(row.gaps);
  return result;
}

inline std::string pilot_csv(const PilotResult& r) {
  std::string out = "superclasses,imbalance_ratio,seeds,mean_gap,std_gap\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{:.6f},{:.6f}\n", row.superclasses, row.ratio, row.gaps.size(), row.gap.mean,
                       row.gap.std);
  }
  return out;
}

inline Json pilot_json(const PilotResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"superclasses", row.superclasses},
                        {"imbalance_ratio", row.ratio},
                        {"gaps", row.gaps},
                        {"mean_gap", row.gap.mean},
                        {"std_gap", row.gap.std}});
  }
  return Json{{"rows", rows}};
}

// ---------------------------------------------------------------------------
// Target + auxiliary benchmark
// ---------------------------------------------------------------------------

struct BenchmarkSpec {
  HierarchySpec hierarchy = [] {
    HierarchySpec h;
    h.test_per_class = 50;
    return h;
  }();
  CountProfile profile{};
  std::vector<Split> expand{Split::medium, Split::few};
  std::size_t samples_per_aux = 100;
  double aux_offset = 3.0;
  std::size_t seeds = 5;

  void validate() const {
    profile.validate();
    HierarchySpec h = hierarchy;
    h.num_classes = profile.num_classes;
    h.validate();
    if (samples_per_aux == 0) throw ConfigError("samples_per_aux must be at least 1");
    if (aux_offset < 0.0) throw ConfigError("auxiliary offset must be non-negative");
    if (seeds == 0) throw ConfigError("benchmark needs at least one seed");
  }
};

/// Data shared by all variants of one benchmark repetition.
struct BenchmarkData {
  SyntheticHierarchy hierarchy;
  LabelSpace target_space;
  SplitAssignment splits;
  std::vector<ClassId> expanded;
  std::uint64_t seed = 0;
};

inline BenchmarkData make_benchmark_data(const BenchmarkSpec& spec, std::uint64_t seed) {
  spec.validate();
  HierarchySpec hs = spec.hierarchy;
  hs.num_classes = spec.profile.num_classes;
  BenchmarkData d;
  d.seed = seed;
  const auto counts = make_counts(spec.profile);
  d.hierarchy = make_hierarchy(hs, counts, seed);
  d.target_space = LabelSpace(hs.num_classes, {});
  d.splits = assign_splits(counts);
  for (ClassId c = 0; c < hs.num_classes; ++c) {
    if (std::find(spec.expand.begin(), spec.expand.end(), d.splits.of(c)) != spec.expand.end()) {
      d.expanded.push_back(c);
    }
  }
  return d;
}

enum class Variant { baseline, ours, merged, linear_probe };

inline const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::ours: return "ours";
    case Variant::merged: return "merged";
    case Variant::linear_probe: return "linear_probe";
  }
  return "?";
}

/// baseline: balanced softmax on target data only.
/// ours: neighbor silencing with `cfg.lambda_s`, masked at evaluation.
/// merged: same with lambda_s = 1.
/// linear_probe: ours, then the target classifier retrained instead of masked.
inline EvalReport run_variant(const BenchmarkSpec& spec, const BenchmarkData& d, Variant v, RunConfig cfg) {
  cfg.seed = d.seed;
  const auto& target = d.hierarchy.train;
  if (v == Variant::baseline) {
    const auto r = train(target, FeatureDataset(target.feature_dim()), d.target_space, cfg);
    return evaluate(r.state, d.hierarchy.test, d.splits, true);
  }
  if (v == Variant::merged) cfg.lambda_s = 1.0;
  cfg.linear_probe = v == Variant::linear_probe;
  const auto aux = make_auxiliary(d.hierarchy, target, d.target_space, d.expanded, cfg.aux_per_target,
                                  spec.samples_per_aux, spec.aux_offset, d.seed);
  const auto plan = make_sampling_plan(ClassStats(target.class_counts(d.target_space.num_target())),
                                       cfg.per_class_cap, cfg.aux_ratio, cfg.aux_per_target, spec.expand);
  const auto r = train(target, aux.data, aux.space, cfg, plan);
  return evaluate(r.state, d.hierarchy.test, d.splits, true);
}

struct BenchmarkRow {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  Variant variant = Variant::baseline;
  std::string axis;   ///< empty outside sweeps
  std::string value;  ///< sweep setting, formatted
  EvalReport report;
};

/// Runs `variants` on every repetition; rows are repetition-major.
inline std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec, const RunConfig& cfg,
                                               const std::vector<Variant>& variants, std::uint64_t seed,
                                               std::size_t jobs = 1) {
  spec.validate();
  cfg.validate();
  std::vector<BenchmarkData> data;
  for (std::size_t rep = 0; rep < spec.seeds; ++rep) data.push_back(make_benchmark_data(spec, repetition_seed(seed, rep)));
  const std::size_t nv = variants.size();
  auto reports = bounded_map(spec.seeds * nv, jobs, [&](std::size_t i) {
    return run_variant(spec, data[i / nv], variants[i % nv], cfg);
  });
  std::vector<BenchmarkRow> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    rows.push_back(BenchmarkRow{i / nv, data[i / nv].seed, variants[i % nv], "", "", std::move(reports[i])});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Ablation sweeps
// ---------------------------------------------------------------------------

struct SweepSpec {
  std::string axis = "lambda_s";
  std::vector<std::string> values;  ///< empty selects the axis defaults
};

inline std::vector<std::string> default_sweep_values(const std::string& axis) {
  if (axis == "aux_count") return {"1", "3", "5", "7", "8"};
  if (axis == "per_class_cap") return {"10", "30", "50", "100", "150"};
  if (axis == "ratio") return {"1:1:3", "0:1:3", "1:1:1", "1:0.5:1"};
  if (axis == "lambda_s") return {"0", "0.1", "0.5", "1"};
  throw ConfigError("unknown sweep axis '" + axis + "' (expected aux_count, per_class_cap, ratio or lambda_s)");
}

/// `cfg` with the sweep setting applied.
inline RunConfig apply_sweep_value(RunConfig cfg, const std::string& axis, const std::string& value) {
  auto number = [&]() {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw ConfigError("bad " + axis + " value '" + value + "'");
    return v;
  };
  auto count = [&]() {
    const double v = number();
    if (v < 1.0 || v != std::floor(v)) throw ConfigError(axis + " values must be positive integers");
    return static_cast<std::size_t>(v);
  };
  if (axis == "aux_count") {
    cfg.aux_per_target = count();
  } else if (axis == "per_class_cap") {
    cfg.per_class_cap = count();
  } else if (axis == "ratio") {
    cfg.aux_ratio = parse_ratio(value);
  } else if (axis == "lambda_s") {
    cfg.lambda_s = number();
  } else {
    default_sweep_values(axis);  // throws
  }
  cfg.validate();
  return cfg;
}

/// One baseline row per repetition followed by one "ours" row per setting and
/// repetition. The ratio axis expands every split so that all three entries
/// of the ratio take effect.
inline std::vector<BenchmarkRow> run_sweep(BenchmarkSpec spec, const RunConfig& cfg, const SweepSpec& sweep,
                                           std::uint64_t seed, std::size_t jobs = 1) {
  const auto values = sweep.values.empty() ? default_sweep_values(sweep.axis) : sweep.values;
  std::vector<RunConfig> configs;
  for (const auto& v : values) configs.push_back(apply_sweep_value(cfg, sweep.axis, v));
  if (sweep.axis == "ratio") spec.expand = {Split::many, Split::medium, Split::few};
  spec.validate();
  std::vector<BenchmarkData> data;
  for (std::size_t rep = 0; rep < spec.seeds; ++rep) data.push_back(make_benchmark_data(spec, repetition_seed(seed, rep)));

  const std::size_t per_rep = 1 + values.size();
  auto reports = bounded_map(spec.seeds * per_rep, jobs, [&](std::size_t i) {
    const auto& d = data[i / per_rep];
    const std::size_t k = i % per_rep;
    return k == 0 ? run_variant(spec, d, Variant::baseline, cfg) : run_variant(spec, d, Variant::ours, configs[k - 1]);
  });
  std::vector<BenchmarkRow> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::size_t k = i % per_rep;
    rows.push_back(BenchmarkRow{i / per_rep, data[i / per_rep].seed, k == 0 ? Variant::baseline : Variant::ours,
                                sweep.axis, k == 0 ? std::string{} : values[k - 1], std::move(reports[i])});
  }
  return rows;
}

inline std::string rows_csv(const std::vector<BenchmarkRow>& rows) {
  auto f = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string{}; };
  std::string out = "axis,value,rep,seed,variant,overall_acc,many_acc,med_acc,few_acc,head_tail_gap,balanced_error\n";
  for (const auto& r : rows) {
    const auto& e = r.report;
    out += fmt::format("{},{},{},{},{},{:.6f},{},{},{},{},{}\n", r.axis, r.value, r.rep, r.seed, to_string(r.variant),
                       e.overall_acc, f(e.many_acc), f(e.med_acc), f(e.few_acc), f(e.head_tail_gap),
                       e.balanced_error ? fmt::format("{:.6f}", e.balanced_error->mean) : std::string{});
  }
  return out;
}

inline Json rows_json(const std::vector<BenchmarkRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back(Json{{"axis", r.axis},
                       {"value", r.value},
                       {"rep", r.rep},
                       {"seed", r.seed},
                       {"variant", to_string(r.variant)},
                       {"report", r.report}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config (de)serialization for the experiment specs
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const PilotSpec& p) {
  j = Json{{"hierarchy", p.hierarchy},
           {"profile", p.profile},
           {"superclasses", p.superclasses},
           {"ratios", p.ratios},
           {"seeds", p.seeds}};
}

inline void merge_json(const Json& j, PilotSpec& p) {
  detail::check_keys(j, {"hierarchy", "profile", "superclasses", "ratios", "seeds"}, "pilot spec");
  if (j.contains("hierarchy")) merge_json(j["hierarchy"], p.hierarchy);
  if (j.contains("profile")) merge_json(j["profile"], p.profile);
  detail::read_opt(j, "superclasses", p.superclasses);
  detail::read_opt(j, "ratios", p.ratios);
  detail::read_opt(j, "seeds", p.seeds);
}

inline void to_json(Json& j, const BenchmarkSpec& b) {
  Json expand = Json::array();
  for (auto s : b.expand) expand.push_back(to_string(s));
  j = Json{{"hierarchy", b.hierarchy},     {"profile", b.profile},       {"expand", expand},
           {"samples_per_aux", b.samples_per_aux}, {"aux_offset", b.aux_offset}, {"seeds", b.seeds}};
}

inline std::vector<Split> parse_splits(const Json& j) {
  std::vector<Split> out;
  for (const auto& v : j) {
    const auto s = split_from_string(v.get<std::string>());
    if (!s) throw ConfigError("unknown split '" + v.get<std::string>() + "'");
    out.push_back(*s);
  }
  return out;
}

inline void merge_json(const Json& j, BenchmarkSpec& b) {
  detail::check_keys(j, {"hierarchy", "profile", "expand", "samples_per_aux", "aux_offset", "seeds"},
                     "benchmark spec");
  if (j.contains("hierarchy")) merge_json(j["hierarchy"], b.hierarchy);
  if (j.contains("profile")) merge_json(j["profile"], b.profile);
  if (j.contains("expand")) b.expand = parse_splits(j["expand"]);
  detail::read_opt(j, "samples_per_aux", b.samples_per_aux);
  detail::read_opt(j, "aux_offset", b.aux_offset);
  detail::read_opt(j, "seeds", b.seeds);
}

inline void to_json(Json& j, const SweepSpec& s) { j = Json{{"axis", s.axis}, {"values", s.values}}; }

inline void merge_json(const Json& j, SweepSpec& s) {
  detail::check_keys(j, {"axis", "values"}, "sweep spec");
  detail::read_opt(j, "axis", s.axis);
  if (j.contains("values")) {
    s.values.clear();
    for (const auto& v : j["values"]) s.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  }
}

}  // namespace tailext
