// tailext: command-line front end for synthetic data generation, curation,
// training, evaluation and experiment sweeps.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tailext/llm_http.hpp"
#include "tailext/tailext.hpp"

#ifndef TAILEXT_VERSION
#define TAILEXT_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace tailext;

namespace {

// ---------------------------------------------------------------------------
// Config sections that only the CLI knows about
// ---------------------------------------------------------------------------

struct SynthSpec {
  HierarchySpec hierarchy{};
  CountProfile profile{};
  std::vector<Split> expand{Split::medium, Split::few};  // empty: no auxiliary set
  std::size_t samples_per_aux = 100;
  double aux_offset = 3.0;
};

void to_json(Json& j, const SynthSpec& s) {
  Json expand = Json::array();
  for (auto e : s.expand) expand.push_back(to_string(e));
  j = Json{{"hierarchy", s.hierarchy},
           {"profile", s.profile},
           {"expand", expand},
           {"samples_per_aux", s.samples_per_aux},
           {"aux_offset", s.aux_offset}};
}

void merge_json(const Json& j, SynthSpec& s) {
  detail::check_keys(j, {"hierarchy", "profile", "expand", "samples_per_aux", "aux_offset"}, "synth spec");
  if (j.contains("hierarchy")) merge_json(j["hierarchy"], s.hierarchy);
  if (j.contains("profile")) merge_json(j["profile"], s.profile);
  if (j.contains("expand")) s.expand = parse_splits(j["expand"]);
  detail::read_opt(j, "samples_per_aux", s.samples_per_aux);
  detail::read_opt(j, "aux_offset", s.aux_offset);
}

struct CurationSettings {
  std::size_t neighbors_per_target = 5;
  std::size_t retry_limit = 2;
  std::size_t retrieval_limit = 200;
  std::size_t max_concurrency = 8;
  std::vector<Split> expand{Split::medium, Split::few};
  std::string caption_match = "substring";
};

void to_json(Json& j, const CurationSettings& c) {
  Json expand = Json::array();
  for (auto e : c.expand) expand.push_back(to_string(e));
  j = Json{{"neighbors_per_target", c.neighbors_per_target},
           {"retry_limit", c.retry_limit},
           {"retrieval_limit", c.retrieval_limit},
           {"max_concurrency", c.max_concurrency},
           {"expand", expand},
           {"caption_match", c.caption_match}};
}

void merge_json(const Json& j, CurationSettings& c) {
  detail::check_keys(j,
                     {"neighbors_per_target", "retry_limit", "retrieval_limit", "max_concurrency", "expand",
                      "caption_match"},
                     "curation settings");
  detail::read_opt(j, "neighbors_per_target", c.neighbors_per_target);
  detail::read_opt(j, "retry_limit", c.retry_limit);
  detail::read_opt(j, "retrieval_limit", c.retrieval_limit);
  detail::read_opt(j, "max_concurrency", c.max_concurrency);
  if (j.contains("expand")) c.expand = parse_splits(j["expand"]);
  detail::read_opt(j, "caption_match", c.caption_match);
  if (c.caption_match != "substring" && c.caption_match != "whole_word") {
    throw ConfigError("caption_match must be substring or whole_word");
  }
}

// ---------------------------------------------------------------------------
// Resolved command configuration
// ---------------------------------------------------------------------------

struct CommandConfig {
  std::string subcommand;
  RunConfig run;
  PilotSpec pilot;
  BenchmarkSpec benchmark;
  SweepSpec sweep;
  SynthSpec synth;
  CurationSettings curation;
  std::optional<bool> mask_aux;  // unset: mask when the checkpoint has auxiliary classes
  std::size_t jobs = 1;
  std::map<std::string, std::string> inputs;
  std::vector<std::string> report_inputs;
};

/// Command-line values; unset ones fall through to the config file.
struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_s, gamma1, gamma2;
  std::optional<std::size_t> cap, jobs, epochs, seeds;
  std::optional<std::string> ratio, llm_fixture;
  std::optional<bool> mask_aux;
  std::map<std::string, std::string> inputs;
  std::optional<std::string> axis;
  std::vector<std::string> values;
  std::vector<std::string> report_inputs;
};

void load_config_file(const fs::path& path, CommandConfig& c) {
  const auto j = read_json_file(path);
  if (!j.is_object()) throw ConfigError(path.string() + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "subcommand") {
      if (value.get<std::string>() != c.subcommand) {
        std::cerr << "warning: " << path.string() << " was written by '" << value.get<std::string>()
                  << "', running '" << c.subcommand << "'\n";
      }
    } else if (key == "version") {
      // informational
    } else if (key == "seed") {
      c.run.seed = value.get<std::uint64_t>();
    } else if (key == "run") {
      const auto seed = c.run.seed;
      merge_json(value, c.run);
      if (j.contains("seed")) c.run.seed = seed;
    } else if (key == "pilot") {
      merge_json(value, c.pilot);
    } else if (key == "benchmark") {
      merge_json(value, c.benchmark);
    } else if (key == "sweep") {
      merge_json(value, c.sweep);
    } else if (key == "synth") {
      merge_json(value, c.synth);
    } else if (key == "curation") {
      merge_json(value, c.curation);
    } else if (key == "mask_aux") {
      if (value.is_null()) {
        c.mask_aux.reset();
      } else {
        c.mask_aux = value.get<bool>();
      }
    } else if (key == "jobs") {
      c.jobs = value.get<std::size_t>();
    } else if (key == "inputs") {
      for (const auto& [name, p] : value.items()) {
        if (name == "in") {
          c.report_inputs = p.get<std::vector<std::string>>();
        } else {
          c.inputs[name] = p.get<std::string>();
        }
      }
    } else {
      throw ConfigError("unknown key '" + key + "' in " + path.string());
    }
  }
}

CommandConfig resolve(const std::string& subcommand, const Flags& f) {
  CommandConfig c;
  c.subcommand = subcommand;
  if (!f.config.empty()) {
    try {
      load_config_file(f.config, c);
    } catch (const DataError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (f.seed) c.run.seed = *f.seed;
  if (f.lambda_s) c.run.lambda_s = *f.lambda_s;
  if (f.gamma1) c.run.gamma1 = *f.gamma1;
  if (f.gamma2) c.run.gamma2 = *f.gamma2;
  if (f.cap) c.run.per_class_cap = *f.cap;
  if (f.ratio) c.run.aux_ratio = parse_ratio(*f.ratio);
  if (f.epochs) c.run.epochs = *f.epochs;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.mask_aux) c.mask_aux = *f.mask_aux;
  if (f.seeds) {
    c.pilot.seeds = *f.seeds;
    c.benchmark.seeds = *f.seeds;
  }
  if (f.llm_fixture) c.inputs["llm_fixture"] = *f.llm_fixture;
  for (const auto& [k, v] : f.inputs) c.inputs[k] = v;
  if (f.axis) c.sweep.axis = *f.axis;
  if (!f.values.empty()) c.sweep.values = f.values;
  if (!f.report_inputs.empty()) c.report_inputs = f.report_inputs;
  if (c.jobs == 0) throw ConfigError("--jobs must be at least 1");
  for (const auto& w : c.run.validate()) std::cerr << "warning: " << w << '\n';
  return c;
}

/// The resolved configuration, limited to what `subcommand` reads. Loading it
/// back with --config reproduces the run.
Json manifest_json(const CommandConfig& c) {
  Json j{{"subcommand", c.subcommand}, {"version", TAILEXT_VERSION}};
  const auto& s = c.subcommand;
  if (s != "eval" && s != "report") j["seed"] = c.run.seed;
  if (s == "synth" || s == "pilot" || s == "curate" || s == "train" || s == "sweep") j["run"] = c.run;
  if (s == "synth") j["synth"] = c.synth;
  if (s == "pilot") j["pilot"] = c.pilot;
  if (s == "sweep") {
    j["benchmark"] = c.benchmark;
    j["sweep"] = c.sweep;
  }
  if (s == "curate") j["curation"] = c.curation;
  if (s == "eval") j["mask_aux"] = c.mask_aux ? Json(*c.mask_aux) : Json(nullptr);
  if (s == "pilot" || s == "sweep") j["jobs"] = c.jobs;
  Json inputs = Json::object();
  for (const auto& [k, v] : c.inputs) inputs[k] = v;
  if (!c.report_inputs.empty()) inputs["in"] = c.report_inputs;
  j["inputs"] = inputs;
  return j;
}

const std::string& require_input(const CommandConfig& c, const std::string& name) {
  const auto it = c.inputs.find(name);
  if (it == c.inputs.end() || it->second.empty()) throw ConfigError("missing required input --" + name);
  return it->second;
}

std::optional<std::string> optional_input(const CommandConfig& c, const std::string& name) {
  const auto it = c.inputs.find(name);
  if (it == c.inputs.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.1f}", *v) : std::string("-"); }

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_synth(const CommandConfig& c, const fs::path& out) {
  SynthSpec spec = c.synth;
  spec.hierarchy.num_classes = spec.profile.num_classes;
  const auto counts = make_counts(spec.profile);
  const auto h = make_hierarchy(spec.hierarchy, counts, c.run.seed);
  std::map<ClassId, std::string> names;
  for (ClassId y = 0; y < spec.hierarchy.num_classes; ++y) {
    names[y] = fmt::format("class-{}-of-group-{}", y, h.superclass_of[y]);
  }
  const LabelSpace target_space(spec.hierarchy.num_classes, {}, names);
  LabelSpace space = target_space;

  if (!spec.expand.empty()) {
    const auto splits = assign_splits(counts);
    std::vector<ClassId> targets;
    for (ClassId y = 0; y < counts.size(); ++y) {
      if (std::find(spec.expand.begin(), spec.expand.end(), splits.of(y)) != spec.expand.end()) targets.push_back(y);
    }
    const auto aux = make_auxiliary(h, h.train, target_space, targets, c.run.aux_per_target, spec.samples_per_aux,
                                    spec.aux_offset, c.run.seed);
    space = aux.space;
    write_manifest(out / "aux.jsonl", aux.data, space);
  }
  write_manifest(out / "train.jsonl", h.train, space);
  write_manifest(out / "test.jsonl", h.test, space);
  write_json_file(out / "space.json", Json(space));
  write_json_file(out / "stats.json", Json(counts));
  write_json_file(out / "synth.json", Json{{"seed", c.run.seed}, {"synth", spec}, {"aux_per_target", c.run.aux_per_target}});
  std::cout << fmt::format("wrote {} train, {} test samples over {} classes ({} auxiliary) to {}\n", h.train.size(),
                           h.test.size(), space.num_target(), space.num_auxiliary(), out.string());
}

void cmd_pilot(const CommandConfig& c, const fs::path& out) {
  const auto result = run_pilot(c.pilot, c.run, c.run.seed, c.jobs);
  const auto csv = pilot_csv(result);
  write_text_file(out / "pilot.csv", csv);
  write_json_file(out / "pilot.json", pilot_json(result));
  std::cout << csv;
}

void cmd_curate(const CommandConfig& c, const fs::path& out) {
  const auto train = read_manifest(require_input(c, "train"));
  const auto space = read_json_file(require_input(c, "space")).get<LabelSpace>();
  const auto corpus = require_input(c, "corpus");

  std::unique_ptr<LlmClient> client;
  if (const auto fixture = optional_input(c, "llm_fixture")) {
    client = std::make_unique<FixtureLlmClient>(FixtureLlmClient::from_directory(*fixture));
  } else if (auto opts = llm_options_from_env()) {
    client = std::make_unique<HttpLlmClient>(*opts);
  } else {
    throw ConfigError("no LLM configured: pass --llm-fixture or set TAILEXT_LLM_URL");
  }
  std::unique_ptr<HttpEmbedder> embedder;
  if (const char* url = std::getenv("TAILEXT_EMBED_URL"); url != nullptr && *url != '\0') {
    HttpClientOptions o;
    o.base_url = url;
    if (const char* key = std::getenv("TAILEXT_EMBED_KEY")) o.api_key = key;
    embedder = std::make_unique<HttpEmbedder>(o);
  }
  auto retriever = FixtureRetriever::from_jsonl(corpus);

  CurationConfig cfg;
  cfg.neighbors_per_target = c.curation.neighbors_per_target;
  cfg.retry_limit = c.curation.retry_limit;
  cfg.retrieval_limit = c.curation.retrieval_limit;
  cfg.max_concurrency = c.curation.max_concurrency;
  cfg.expand = c.curation.expand;
  cfg.filter.gamma1 = c.run.gamma1;
  cfg.filter.gamma2 = c.run.gamma2;
  cfg.filter.caption_mode = c.curation.caption_match == "whole_word" ? CaptionMatch::whole_word : CaptionMatch::substring;

  const auto result = curate(space, train.data, *client, retriever, cfg, embedder.get());
  write_manifest(out / "aux.jsonl", result.aux, result.space);
  write_json_file(out / "space.json", Json(result.space));
  write_json_file(out / "curation_report.json", Json(result.report));
  for (const auto& w : result.report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << fmt::format("kept {} samples in {} auxiliary classes for {} targets\n", result.aux.size(),
                           result.space.num_auxiliary(), result.report.targets.size());
}

void cmd_train(const CommandConfig& c, const fs::path& out) {
  const auto train_m = read_manifest(require_input(c, "train"));
  const auto aux_path = optional_input(c, "aux");
  const auto space_path = optional_input(c, "space");
  LabelSpace space;
  if (space_path) {
    space = read_json_file(*space_path).get<LabelSpace>();
  } else {
    if (aux_path) throw ConfigError("--aux needs --space to attach auxiliary classes to targets");
    space = LabelSpace(train_m.header.num_target, {});
  }
  FeatureDataset aux(train_m.data.feature_dim());
  if (aux_path) {
    auto m = read_manifest(*aux_path);
    if (m.header.feature_dim != train_m.header.feature_dim) {
      throw DataError("auxiliary manifest has feature dimension " + std::to_string(m.header.feature_dim) +
                      ", training manifest " + std::to_string(train_m.header.feature_dim));
    }
    aux = std::move(m.data);
  } else if (space.num_auxiliary() > 0) {
    space = LabelSpace(space.num_target(), {}, [&] {
      std::map<ClassId, std::string> names;
      for (const auto& [id, n] : space.class_names()) {
        if (space.is_target(id)) names[id] = n;
      }
      return names;
    }());
  }
  const auto result = train(train_m.data, aux, space, c.run);
  auto ckpt = checkpoint_json(result.state);
  ckpt["run"] = c.run;
  write_json_file(out / "checkpoint.json", ckpt);
  write_json_file(out / "train_log.json", Json(result.log));
  const auto& last = result.log.epochs.back();
  std::cout << fmt::format("trained {} epochs with {} ({} target + {} auxiliary classes), final loss {:.4f}\n",
                           result.log.epochs.size(), to_string(result.log.loss), space.num_target(),
                           space.num_auxiliary(), last.mean_loss);
}

void cmd_eval(const CommandConfig& c, const fs::path& out) {
  const auto ckpt = read_json_file(require_input(c, "checkpoint"));
  const auto state = checkpoint_from_json(ckpt);
  const auto test = read_manifest(require_input(c, "test"));
  if (test.data.feature_dim() != state.input_dim) {
    throw DataError("test features have dimension " + std::to_string(test.data.feature_dim()) +
                    ", checkpoint expects " + std::to_string(state.input_dim));
  }
  const bool mask = c.mask_aux.value_or(state.space.num_auxiliary() > 0);
  const auto splits = assign_splits(ClassStats(state.target_counts));
  const auto report = evaluate(state, test.data, splits, mask);
  Json j = report;
  Json inputs = Json::object();
  for (const auto& [k, v] : c.inputs) inputs[k] = v;
  const Json train_cfg = ckpt.contains("run") ? ckpt["run"] : Json(nullptr);
  j["seed"] = train_cfg.is_null() ? Json(nullptr) : train_cfg["seed"];
  j["config"] = Json{{"train", train_cfg}, {"mask_aux", mask}, {"inputs", inputs}};
  write_json_file(out / "eval_report.json", j);
  std::cout << fmt::format("overall {:.1f}  many {}  medium {}  few {}  gap {}  ({}-way{})\n", report.overall_acc,
                           fmt_opt(report.many_acc), fmt_opt(report.med_acc), fmt_opt(report.few_acc),
                           fmt_opt(report.head_tail_gap), report.num_classes_scored, report.masked ? ", masked" : "");
}

void cmd_sweep(const CommandConfig& c, const fs::path& out) {
  const auto rows = run_sweep(c.benchmark, c.run, c.sweep, c.run.seed, c.jobs);
  write_text_file(out / "sweep.csv", rows_csv(rows));
  write_json_file(out / "sweep.json", Json{{"axis", c.sweep.axis}, {"rows", rows_json(rows)}});
  std::cout << rows_csv(rows);
}

/// Markdown summary of pilot, sweep or eval outputs.
std::string summarize(const Json& j, const std::string& name) {
  std::string md = "## " + name + "\n\n";
  auto num = [](const Json& v) { return v.is_null() ? std::string("-") : fmt::format("{:.1f}", v.get<double>()); };
  if (j.contains("rows") && !j["rows"].empty() && j["rows"][0].contains("superclasses")) {
    md += "| superclasses | imbalance ratio | mean gap | std |\n|---|---|---|---|\n";
    for (const auto& r : j["rows"]) {
      md += fmt::format("| {} | {} | {} | {} |\n", r["superclasses"].get<std::size_t>(),
                        r["imbalance_ratio"].get<double>(), num(r["mean_gap"]), num(r["std_gap"]));
    }
  } else if (j.contains("rows")) {
    // mean over repetitions per (variant, value)
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<Json>> groups;
    for (const auto& r : j["rows"]) {
      std::pair<std::string, std::string> k{r["variant"].get<std::string>(), r["value"].get<std::string>()};
      if (!groups.contains(k)) keys.push_back(k);
      groups[k].push_back(r["report"]);
    }
    md += fmt::format("| variant | {} | overall | many | medium | few |\n|---|---|---|---|---|---|\n",
                      j.value("axis", std::string("value")));
    for (const auto& k : keys) {
      auto mean = [&](const char* field) -> Json {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& rep : groups[k]) {
          if (!rep[field].is_null()) {
            s += rep[field].get<double>();
            ++n;
          }
        }
        return n == 0 ? Json(nullptr) : Json(s / static_cast<double>(n));
      };
      md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", k.first, k.second.empty() ? "-" : k.second,
                        num(mean("overall_acc")), num(mean("many_acc")), num(mean("med_acc")), num(mean("few_acc")));
    }
  } else if (j.contains("overall_acc")) {
    md += "| overall | many | medium | few | gap |\n|---|---|---|---|---|\n";
    md += fmt::format("| {} | {} | {} | {} | {} |\n", num(j["overall_acc"]), num(j["many_acc"]), num(j["med_acc"]),
                      num(j["few_acc"]), num(j["head_tail_gap"]));
  } else {
    throw DataError(name + " is not a pilot, sweep or eval output");
  }
  return md + "\n";
}

void cmd_report(const CommandConfig& c, const fs::path& out) {
  if (c.report_inputs.empty()) throw ConfigError("report needs at least one --in file");
  std::string md = "# Results\n\n";
  for (const auto& in : c.report_inputs) md += summarize(read_json_file(in), fs::path(in).filename().string());
  write_text_file(out / "report.md", md);
  std::cout << md;
}

int run(int argc, char** argv) {
  CLI::App app{"Long-tail classification with auxiliary neighbor categories"};
  app.set_version_flag("--version", std::string(TAILEXT_VERSION));
  app.require_subcommand(1);

  Flags flags;
  std::map<std::string, CLI::App*> subs;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate a synthetic hierarchy with optional auxiliary classes"},
      {"pilot", "granularity pilot: head-tail gap over superclass count and imbalance"},
      {"curate", "query, retrieve and filter auxiliary neighbor categories"},
      {"train", "train a classifier on target (+ auxiliary) manifests"},
      {"eval", "evaluate a checkpoint on a test manifest"},
      {"sweep", "ablation sweep on the synthetic benchmark"},
      {"report", "summarize result files as markdown"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON config file or a previous run manifest");
    sub->add_option("--out", flags.out, "output directory")->required();
    sub->add_option("--seed", flags.seed, "root seed");
    subs[name] = sub;
  }
  for (const auto* name : {"pilot", "curate", "train", "sweep"}) {
    auto* sub = subs[name];
    sub->add_option("--lambda-s", flags.lambda_s, "neighbor-silencing weight");
    sub->add_option("--gamma1", flags.gamma1, "lower cosine bound of the keep band");
    sub->add_option("--gamma2", flags.gamma2, "upper cosine bound of the keep band");
    sub->add_option("--cap", flags.cap, "per-class auxiliary cap per epoch");
    sub->add_option("--ratio", flags.ratio, "auxiliary ratio h:m:t");
    sub->add_option("--epochs", flags.epochs, "training epochs");
  }
  for (const auto* name : {"pilot", "sweep"}) {
    subs[name]->add_option("--jobs", flags.jobs, "concurrent grid points");
    subs[name]->add_option("--seeds", flags.seeds, "repetitions per grid point");
  }
  auto input = [&](CLI::App* sub, const std::string& name, const std::string& help) {
    sub->add_option_function<std::string>("--" + name, [&flags, name](const std::string& v) { flags.inputs[name] = v; },
                                          help);
  };
  input(subs["curate"], "train", "training manifest (prototypes)");
  input(subs["curate"], "space", "label space JSON with class names");
  input(subs["curate"], "corpus", "candidate corpus JSONL");
  subs["curate"]->add_option("--llm-fixture", flags.llm_fixture, "directory with recorded LLM responses");
  input(subs["train"], "train", "training manifest");
  input(subs["train"], "aux", "auxiliary manifest");
  input(subs["train"], "space", "label space JSON");
  input(subs["eval"], "checkpoint", "checkpoint JSON");
  input(subs["eval"], "test", "test manifest");
  subs["eval"]->add_flag_function(
      "--mask-aux,!--no-mask-aux", [&flags](std::int64_t n) { flags.mask_aux = n > 0; },
      "drop auxiliary classifier rows before predicting (default when K > 0)");
  subs["sweep"]->add_option("--axis", flags.axis, "aux_count, per_class_cap, ratio or lambda_s");
  subs["sweep"]->add_option("--values", flags.values, "settings for the axis (default: the standard grid)");
  subs["report"]->add_option("--in", flags.report_inputs, "pilot.json, sweep.json or eval_report.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }
  const auto cfg = resolve(name, flags);
  const fs::path out = flags.out;
  fs::create_directories(out);
  write_json_file(out / ("run_manifest." + name + ".json"), manifest_json(cfg));

  if (name == "synth") cmd_synth(cfg, out);
  if (name == "pilot") cmd_pilot(cfg, out);
  if (name == "curate") cmd_curate(cfg, out);
  if (name == "train") cmd_train(cfg, out);
  if (name == "eval") cmd_eval(cfg, out);
  if (name == "sweep") cmd_sweep(cfg, out);
  if (name == "report") cmd_report(cfg, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tailext::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
