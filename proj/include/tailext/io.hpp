#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tailext/core.hpp"
#include "tailext/curation.hpp"
#include "tailext/metrics.hpp"
#include "tailext/model.hpp"
#include "tailext/sampling.hpp"
#include "tailext/splits.hpp"
#include "tailext/synth.hpp"

namespace tailext {

using Json = nlohmann::ordered_json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kManifestVersion = 1;

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Pretty-printed with a trailing newline.
inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Enums
// ---------------------------------------------------------------------------

namespace detail {

template <typename E, std::size_t N>
E enum_from(const Json& j, const std::array<std::pair<E, const char*>, N>& table, const char* what) {
  const auto s = j.get<std::string>();
  for (const auto& [e, name] : table) {
    if (s == name) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

template <typename E, std::size_t N>
const char* enum_name(E e, const std::array<std::pair<E, const char*>, N>& table) {
  for (const auto& [v, name] : table) {
    if (v == e) return name;
  }
  return "?";
}

inline constexpr std::array<std::pair<OptimizerKind, const char*>, 2> kOptimizers{
    {{OptimizerKind::sgd, "sgd"}, {OptimizerKind::adamw, "adamw"}}};
inline constexpr std::array<std::pair<Activation, const char*>, 2> kActivations{
    {{Activation::identity, "identity"}, {Activation::relu, "relu"}}};
inline constexpr std::array<std::pair<ProfileKind, const char*>, 2> kProfiles{
    {{ProfileKind::exponential, "exponential"}, {ProfileKind::pareto, "pareto"}}};

/// Rejects keys outside `known` so that misspelled config entries fail loudly.
inline void check_keys(const Json& j, std::initializer_list<std::string_view> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + what);
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ratios
// ---------------------------------------------------------------------------

/// Parses "h:m:t", e.g. "1:0.5:1".
inline AuxRatio parse_ratio(std::string_view text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw ConfigError("ratio must look like h:m:t, got '" + std::string(text) + "'");
  std::array<double, 3> v{};
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t used = 0;
    try {
      v[i] = std::stod(parts[i], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != parts[i].size() || !(v[i] >= 0.0) || !std::isfinite(v[i])) {
      throw ConfigError("bad ratio entry '" + parts[i] + "' in '" + std::string(text) + "'");
    }
  }
  return AuxRatio{v[0], v[1], v[2]};
}

inline std::string format_ratio(const AuxRatio& r) {
  std::ostringstream s;
  s << r.head << ':' << r.medium << ':' << r.tail;
  return s.str();
}

inline void to_json(Json& j, const AuxRatio& r) { j = Json::array({r.head, r.medium, r.tail}); }

inline void from_json(const Json& j, AuxRatio& r) {
  if (j.is_string()) {
    r = parse_ratio(j.get<std::string>());
    return;
  }
  if (!j.is_array() || j.size() != 3) throw ConfigError("aux_ratio must be [h, m, t] or \"h:m:t\"");
  r = AuxRatio{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const RunConfig& c) {
  j = Json{{"seed", c.seed},
           {"lambda_s", c.lambda_s},
           {"gamma1", c.gamma1},
           {"gamma2", c.gamma2},
           {"per_class_cap", c.per_class_cap},
           {"aux_ratio", c.aux_ratio ? Json(*c.aux_ratio) : Json(nullptr)},
           {"aux_per_target", c.aux_per_target},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"optimizer", detail::enum_name(c.optimizer, detail::kOptimizers)},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"hidden_dim", c.hidden_dim},
           {"activation", detail::enum_name(c.activation, detail::kActivations)},
           {"linear_probe", c.linear_probe}};
}

/// Overlays the keys present in `j` onto `c`.
inline void merge_json(const Json& j, RunConfig& c) {
  detail::check_keys(j,
                     {"seed", "lambda_s", "gamma1", "gamma2", "per_class_cap", "aux_ratio", "aux_per_target",
                      "epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "optimizer",
                      "adam_beta1", "adam_beta2", "hidden_dim", "activation", "linear_probe"},
                     "run config");
  detail::read_opt(j, "seed", c.seed);
  detail::read_opt(j, "lambda_s", c.lambda_s);
  detail::read_opt(j, "gamma1", c.gamma1);
  detail::read_opt(j, "gamma2", c.gamma2);
  detail::read_opt(j, "per_class_cap", c.per_class_cap);
  if (j.contains("aux_ratio")) {
    if (j["aux_ratio"].is_null()) {
      c.aux_ratio.reset();
    } else {
      c.aux_ratio = j["aux_ratio"].get<AuxRatio>();
    }
  }
  detail::read_opt(j, "aux_per_target", c.aux_per_target);
  detail::read_opt(j, "epochs", c.epochs);
  detail::read_opt(j, "batch_size", c.batch_size);
  detail::read_opt(j, "learning_rate", c.learning_rate);
  detail::read_opt(j, "momentum", c.momentum);
  detail::read_opt(j, "weight_decay", c.weight_decay);
  if (j.contains("optimizer")) c.optimizer = detail::enum_from(j["optimizer"], detail::kOptimizers, "optimizer");
  detail::read_opt(j, "adam_beta1", c.adam_beta1);
  detail::read_opt(j, "adam_beta2", c.adam_beta2);
  detail::read_opt(j, "hidden_dim", c.hidden_dim);
  if (j.contains("activation")) {
    c.activation = detail::enum_from(j["activation"], detail::kActivations, "activation");
  }
  detail::read_opt(j, "linear_probe", c.linear_probe);
}

inline void from_json(const Json& j, RunConfig& c) {
  c = RunConfig{};
  merge_json(j, c);
}

// ---------------------------------------------------------------------------
// Synthetic specs
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const CountProfile& p) {
  j = Json{{"kind", detail::enum_name(p.kind, detail::kProfiles)},
           {"num_classes", p.num_classes},
           {"max_count", p.max_count},
           {"ratio", p.ratio},
           {"alpha", p.alpha},
           {"min_count", p.min_count}};
}

inline void merge_json(const Json& j, CountProfile& p) {
  detail::check_keys(j, {"kind", "num_classes", "max_count", "ratio", "alpha", "min_count"}, "count profile");
  if (j.contains("kind")) p.kind = detail::enum_from(j["kind"], detail::kProfiles, "profile kind");
  detail::read_opt(j, "num_classes", p.num_classes);
  detail::read_opt(j, "max_count", p.max_count);
  detail::read_opt(j, "ratio", p.ratio);
  detail::read_opt(j, "alpha", p.alpha);
  detail::read_opt(j, "min_count", p.min_count);
}

inline void from_json(const Json& j, CountProfile& p) {
  p = CountProfile{};
  merge_json(j, p);
}

inline void to_json(Json& j, const HierarchySpec& s) {
  j = Json{{"num_superclasses", s.num_superclasses},
           {"num_classes", s.num_classes},
           {"feature_dim", s.feature_dim},
           {"superclass_spread", s.superclass_spread},
           {"fine_spread", s.fine_spread},
           {"sample_noise", s.sample_noise},
           {"nuisance_spread", s.nuisance_spread},
           {"nuisance_rank", s.nuisance_rank},
           {"test_per_class", s.test_per_class}};
}

inline void merge_json(const Json& j, HierarchySpec& s) {
  detail::check_keys(j,
                     {"num_superclasses", "num_classes", "feature_dim", "superclass_spread", "fine_spread",
                      "sample_noise", "nuisance_spread", "nuisance_rank", "test_per_class"},
                     "hierarchy spec");
  detail::read_opt(j, "num_superclasses", s.num_superclasses);
  detail::read_opt(j, "num_classes", s.num_classes);
  detail::read_opt(j, "feature_dim", s.feature_dim);
  detail::read_opt(j, "superclass_spread", s.superclass_spread);
  detail::read_opt(j, "fine_spread", s.fine_spread);
  detail::read_opt(j, "sample_noise", s.sample_noise);
  detail::read_opt(j, "nuisance_spread", s.nuisance_spread);
  detail::read_opt(j, "nuisance_rank", s.nuisance_rank);
  detail::read_opt(j, "test_per_class", s.test_per_class);
}

inline void from_json(const Json& j, HierarchySpec& s) {
  s = HierarchySpec{};
  merge_json(j, s);
}

// ---------------------------------------------------------------------------
// Core types
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const LabelSpace& s) {
  Json names = Json::object();
  for (const auto& [id, name] : s.class_names()) names[std::to_string(id)] = name;
  j = Json{{"num_target", s.num_target()}, {"neighbor_of", s.neighbor_table()}, {"names", names}};
}

inline void from_json(const Json& j, LabelSpace& s) {
  try {
    std::map<ClassId, std::string> names;
    if (j.contains("names")) {
      for (const auto& [key, value] : j.at("names").items()) {
        names[static_cast<ClassId>(std::stoull(key))] = value.get<std::string>();
      }
    }
    s = LabelSpace(j.at("num_target").get<std::size_t>(), j.at("neighbor_of").get<std::vector<ClassId>>(),
                   std::move(names));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed label space: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw DataError("malformed label space: class name keys must be integers");
  }
}

inline void to_json(Json& j, const ClassStats& s) {
  j = Json{{"counts", std::vector<std::size_t>(s.counts().begin(), s.counts().end())}};
}

inline void from_json(const Json& j, ClassStats& s) {
  try {
    s = ClassStats(j.at("counts").get<std::vector<std::size_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed class statistics: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

/// Sidecar describing a JSONL manifest.
struct ManifestHeader {
  std::size_t feature_dim = 0;
  std::size_t num_target = 0;
  std::size_t num_auxiliary = 0;
  std::size_t num_records = 0;
  Provenance provenance = Provenance::synthetic;
};

/// `train.jsonl` -> `train.header.json`.
inline std::filesystem::path header_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".header.json");
  return p;
}

inline void write_manifest(const std::filesystem::path& path, const FeatureDataset& data, const LabelSpace& space) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = data.features(i);
    const Json rec{{"id", data.id(i)}, {"label", data.label(i)}, {"features", std::vector<double>(f.begin(), f.end())}};
    out << rec.dump() << '\n';
  }
  write_json_file(header_path(path), Json{{"format", "tailext-manifest"},
                                          {"version", kManifestVersion},
                                          {"feature_dim", data.feature_dim()},
                                          {"num_target", space.num_target()},
                                          {"num_auxiliary", space.num_auxiliary()},
                                          {"num_records", data.size()},
                                          {"provenance", to_string(data.provenance())}});
}

inline ManifestHeader read_manifest_header(const std::filesystem::path& manifest) {
  const auto hp = header_path(manifest);
  if (!std::filesystem::exists(hp)) throw DataError("missing manifest header " + hp.string());
  const auto j = read_json_file(hp);
  try {
    if (j.at("version").get<int>() != kManifestVersion) {
      throw DataError("unsupported manifest version in " + hp.string());
    }
    ManifestHeader h;
    h.feature_dim = j.at("feature_dim").get<std::size_t>();
    h.num_target = j.at("num_target").get<std::size_t>();
    h.num_auxiliary = j.at("num_auxiliary").get<std::size_t>();
    h.num_records = j.value("num_records", std::size_t{0});
    h.provenance = j.value("provenance", std::string("synthetic")) == "ingested" ? Provenance::ingested
                                                                                 : Provenance::synthetic;
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest header " + hp.string() + ": " + e.what());
  }
}

struct LoadedManifest {
  ManifestHeader header;
  FeatureDataset data;
};

/// Reads a manifest and its header; every record must match the header's
/// feature dimension.
inline LoadedManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing manifest " + path.string());
  LoadedManifest m;
  m.header = read_manifest_header(path);
  m.data = FeatureDataset(m.header.feature_dim, m.header.provenance);
  std::ifstream in(path);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = Json::parse(line);
      const auto features = j.at("features").get<std::vector<double>>();
      if (features.size() != m.header.feature_dim) {
        throw DataError(where + ": feature dimension " + std::to_string(features.size()) + ", header says " +
                        std::to_string(m.header.feature_dim));
      }
      m.data.add(features, j.at("label").get<ClassId>(), j.value("id", std::string{}));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (m.header.num_records != 0 && m.header.num_records != m.data.size()) {
    throw DataError(path.string() + " holds " + std::to_string(m.data.size()) + " records, header says " +
                    std::to_string(m.header.num_records));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const Layer& l) {
  j = Json{{"rows", l.rows}, {"cols", l.cols}, {"weights", l.weights}, {"bias", l.bias}};
}

inline void from_json(const Json& j, Layer& l) {
  l = Layer(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  l.weights = j.at("weights").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (l.weights.size() != l.rows * l.cols || l.bias.size() != l.rows) {
    throw DataError("layer shape does not match its parameters");
  }
}

/// Versioned checkpoint. Optimizer slots are not stored.
inline Json checkpoint_json(const ClassifierState& s) {
  return Json{{"format", "tailext-checkpoint"},
              {"version", kCheckpointVersion},
              {"input_dim", s.input_dim},
              {"activation", detail::enum_name(s.activation, detail::kActivations)},
              {"hidden", s.hidden ? Json(*s.hidden) : Json(nullptr)},
              {"output", s.output},
              {"space", s.space},
              {"masked", s.masked},
              {"target_counts", s.target_counts}};
}

inline ClassifierState checkpoint_from_json(const Json& j) {
  try {
    if (j.value("format", std::string{}) != "tailext-checkpoint") throw DataError("not a checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    ClassifierState s;
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.activation = detail::enum_from(j.at("activation"), detail::kActivations, "activation");
    if (!j.at("hidden").is_null()) s.hidden = j.at("hidden").get<Layer>();
    s.output = j.at("output").get<Layer>();
    s.space = j.at("space").get<LabelSpace>();
    s.masked = j.at("masked").get<bool>();
    s.target_counts = j.at("target_counts").get<std::vector<std::size_t>>();
    const std::size_t in = s.hidden ? s.hidden->rows : s.input_dim;
    if ((s.hidden && s.hidden->cols != s.input_dim) || s.output.cols != in || s.output.rows != s.space.size()) {
      throw DataError("checkpoint layer shapes are inconsistent");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const ClassifierState& s) {
  write_json_file(path, checkpoint_json(s));
}

inline ClassifierState load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}
}  // namespace detail

inline void to_json(Json& j, const EvalReport& r) {
  j = Json{{"overall_acc", r.overall_acc},
           {"many_acc", detail::opt(r.many_acc)},
           {"med_acc", detail::opt(r.med_acc)},
           {"few_acc", detail::opt(r.few_acc)},
           {"head_tail_gap", detail::opt(r.head_tail_gap)},
           {"balanced_error", r.balanced_error ? Json{{"sum", r.balanced_error->sum}, {"mean", r.balanced_error->mean}}
                                               : Json(nullptr)},
           {"num_test", r.num_test},
           {"num_many", r.num_many},
           {"num_med", r.num_med},
           {"num_few", r.num_few},
           {"num_classes_scored", r.num_classes_scored},
           {"masked", r.masked}};
}

inline void to_json(Json& j, const AuxSamplingPlan& p) {
  Json targets = Json::object();
  for (const auto& [t, s] : p.expanded_targets) targets[std::to_string(t)] = to_string(s);
  j = Json{{"per_class_cap", p.per_class_cap},
           {"ratio", p.ratio},
           {"per_target", p.per_target},
           {"categories", {{"many", p.categories_for(Split::many)},
                           {"medium", p.categories_for(Split::medium)},
                           {"few", p.categories_for(Split::few)}}},
           {"expanded_targets", targets}};
}

inline void to_json(Json& j, const EpochLog& e) {
  j = Json{{"epoch", e.epoch},
           {"mean_loss", e.mean_loss},
           {"target_samples", e.target_samples},
           {"aux_samples", e.aux_samples},
           {"active_classes", e.active_classes},
           {"sample_digest", e.sample_digest},
           {"empty_aux_classes", e.empty_aux_classes}};
}

inline void to_json(Json& j, const TrainLog& t) {
  j = Json{{"loss", to_string(t.loss)},
           {"plan", t.plan ? Json(*t.plan) : Json(nullptr)},
           {"epochs", t.epochs},
           {"linear_probe", t.linear_probe},
           {"probe_epochs", t.probe_epochs}};
}

inline void to_json(Json& j, const CurationReport& r) {
  Json targets = Json::array();
  for (const auto& t : r.targets) {
    targets.push_back(Json{{"target", t.target},
                           {"name", t.name},
                           {"proposed", t.proposed},
                           {"leaked", t.leaked},
                           {"duplicates", t.duplicates},
                           {"retrieved", t.retrieved},
                           {"rejected_caption", t.rejected_caption},
                           {"rejected_similarity_low", t.rejected_low},
                           {"rejected_similarity_high", t.rejected_high},
                           {"kept", t.kept},
                           {"aux_classes", t.aux_classes}});
  }
  Json decisions = Json::array();
  for (const auto& d : r.decisions) {
    decisions.push_back(Json{{"image_ref", d.image_ref},
                             {"proposed_class", d.proposed_class},
                             {"source_target", d.source_target},
                             {"kept", d.kept},
                             {"reason", d.reason ? Json(to_string(*d.reason)) : Json(nullptr)},
                             {"cosine", detail::opt(d.cosine)}});
  }
  j = Json{{"targets", targets}, {"decisions", decisions}, {"warnings", r.warnings}};
}

}  // namespace tailext
