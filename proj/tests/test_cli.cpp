#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tailext/io.hpp"

using tailext::Json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(TAILEXT_FIXTURES) / "curation";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("tailext-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = std::string("\"") + TAILEXT_CLI_PATH + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small synth config: 20 classes, 16-d features.
fs::path write_synth_config(const fs::path& dir) {
  const Json cfg{{"synth",
                  {{"hierarchy", {{"num_superclasses", 4}, {"feature_dim", 16}, {"test_per_class", 10}}},
                   {"profile", {{"num_classes", 20}, {"max_count", 150}, {"ratio", 0.05}}},
                   {"samples_per_aux", 20}}},
                 {"run", {{"aux_per_target", 2}, {"epochs", 3}}}};
  const auto p = dir / "synth_config.json";
  tailext::write_json_file(p, cfg);
  return p;
}

fs::path write_pilot_config(const fs::path& dir) {
  const Json cfg{{"pilot",
                  {{"hierarchy", {{"feature_dim", 16}, {"test_per_class", 10}}},
                   {"profile", {{"num_classes", 20}, {"max_count", 150}}},
                   {"superclasses", {2, 5}},
                   {"ratios", {1.0, 0.05}},
                   {"seeds", 2}}},
                 {"run", {{"epochs", 2}}}};
  const auto p = dir / "pilot_config.json";
  tailext::write_json_file(p, cfg);
  return p;
}

}  // namespace

TEST(Cli, HelpVersionAndUsageErrors) {
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("--version"), 0);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate --out /tmp/x"), 2);
  EXPECT_EQ(cli("train"), 2);  // --out is required
  const auto dir = scratch("usage");
  EXPECT_EQ(cli("train --out " + dir.string() + " --lambda-s -1 --train x"), 2);
  EXPECT_EQ(cli("pilot --out " + dir.string() + " --ratio 1:1"), 2);
}

TEST(Cli, DataAndServiceErrorCodes) {
  const auto dir = scratch("codes");
  EXPECT_EQ(cli("train --out " + dir.string() + " --train " + (dir / "missing.jsonl").string()), 3);
  EXPECT_EQ(cli("eval --out " + dir.string() + " --checkpoint " + (dir / "none.json").string() + " --test x"), 3);
  // LLM fixture without an entry for any expanded target: service failure
  fs::create_directories(dir / "llm");
  std::ofstream(dir / "llm" / "responses.json") << "{}";
  const std::string curate = "curate --out " + (dir / "cur").string() + " --train " + (kFixtures / "train.jsonl").string() +
                             " --space " + (kFixtures / "space.json").string() + " --corpus " +
                             (kFixtures / "corpus.jsonl").string();
  EXPECT_EQ(cli(curate + " --llm-fixture " + (dir / "llm").string()), 4);
  std::ofstream(dir / "llm" / "responses.json") << R"({"ragdoll": "", "sports car": "", "pickup truck": ""})";
  EXPECT_EQ(cli(curate + " --llm-fixture " + (dir / "llm").string()), 4);
}

TEST(Cli, UnknownConfigKeyIsAConfigError) {
  const auto dir = scratch("badcfg");
  tailext::write_json_file(dir / "c.json", Json{{"run", {{"lamda_s", 0.3}}}});
  EXPECT_EQ(cli("pilot --out " + dir.string() + " --config " + (dir / "c.json").string()), 2);
  tailext::write_json_file(dir / "d.json", Json{{"colour", "blue"}});
  EXPECT_EQ(cli("pilot --out " + dir.string() + " --config " + (dir / "d.json").string()), 2);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto dir = scratch("precedence");
  const auto cfg = write_pilot_config(dir);
  tailext::write_json_file(dir / "seeded.json",
                           [&] {
                             auto j = tailext::read_json_file(cfg);
                             j["seed"] = 11;
                             j["run"]["lambda_s"] = 0.3;
                             j["pilot"]["seeds"] = 1;
                             j["pilot"]["superclasses"] = {2};
                             j["pilot"]["ratios"] = {0.05};
                             return j;
                           }());
  ASSERT_EQ(cli("pilot --out " + (dir / "a").string() + " --config " + (dir / "seeded.json").string() +
                " --seed 5 --epochs 1"),
            0);
  const auto m = tailext::read_json_file(dir / "a" / "run_manifest.pilot.json");
  EXPECT_EQ(m["seed"].get<int>(), 5);
  EXPECT_EQ(m["run"]["seed"].get<int>(), 5);
  EXPECT_EQ(m["run"]["epochs"].get<int>(), 1);
  EXPECT_EQ(m["run"]["lambda_s"].get<double>(), 0.3);  // file beats default
  EXPECT_EQ(m["run"]["batch_size"].get<int>(), 128);    // default survives
  EXPECT_EQ(m["pilot"]["seeds"].get<int>(), 1);
}

TEST(Cli, ManifestReplayIsByteIdentical) {
  const auto dir = scratch("replay");
  const auto cfg = write_pilot_config(dir);
  ASSERT_EQ(cli("pilot --out " + (dir / "a").string() + " --config " + cfg.string() + " --seed 3 --jobs 2"), 0);
  ASSERT_EQ(cli("pilot --out " + (dir / "b").string() + " --config " + (dir / "a" / "run_manifest.pilot.json").string()),
            0);
  EXPECT_EQ(slurp(dir / "a" / "pilot.csv"), slurp(dir / "b" / "pilot.csv"));
  EXPECT_EQ(slurp(dir / "a" / "pilot.json"), slurp(dir / "b" / "pilot.json"));
  EXPECT_EQ(slurp(dir / "a" / "run_manifest.pilot.json"), slurp(dir / "b" / "run_manifest.pilot.json"));
  const auto csv = slurp(dir / "a" / "pilot.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "superclasses,imbalance_ratio,seeds,mean_gap,std_gap");
}

TEST(Cli, SynthTrainEvalPipeline) {
  const auto dir = scratch("pipeline");
  const auto cfg = write_synth_config(dir);
  const auto data = dir / "data";
  ASSERT_EQ(cli("synth --out " + data.string() + " --config " + cfg.string() + " --seed 7"), 0);
  for (const char* f : {"train.jsonl", "test.jsonl", "aux.jsonl", "space.json", "stats.json", "train.header.json"}) {
    EXPECT_TRUE(fs::exists(data / f)) << f;
  }
  const std::string inputs = " --train " + (data / "train.jsonl").string() + " --aux " + (data / "aux.jsonl").string() +
                             " --space " + (data / "space.json").string();
  ASSERT_EQ(cli("train --out " + (dir / "m1").string() + " --epochs 3" + inputs), 0);
  ASSERT_EQ(cli("train --out " + (dir / "m2").string() + " --epochs 3" + inputs), 0);
  EXPECT_EQ(slurp(dir / "m1" / "checkpoint.json"), slurp(dir / "m2" / "checkpoint.json"));
  EXPECT_EQ(slurp(dir / "m1" / "train_log.json"), slurp(dir / "m2" / "train_log.json"));

  const std::string eval = "eval --checkpoint " + (dir / "m1" / "checkpoint.json").string() + " --test " +
                           (data / "test.jsonl").string();
  ASSERT_EQ(cli(eval + " --out " + (dir / "e1").string(), dir / "eval.log"), 0);
  const auto masked = tailext::read_json_file(dir / "e1" / "eval_report.json");
  EXPECT_TRUE(masked["masked"].get<bool>());
  EXPECT_EQ(masked["num_classes_scored"].get<int>(), 20);
  EXPECT_EQ(masked["seed"].get<int>(), 0);
  EXPECT_EQ(masked["config"]["train"]["epochs"].get<int>(), 3);
  EXPECT_TRUE(masked["config"]["mask_aux"].get<bool>());
  EXPECT_NE(slurp(dir / "eval.log").find("overall "), std::string::npos);
  ASSERT_EQ(cli(eval + " --no-mask-aux --out " + (dir / "e2").string()), 0);
  const auto raw = tailext::read_json_file(dir / "e2" / "eval_report.json");
  EXPECT_FALSE(raw["masked"].get<bool>());
  EXPECT_GT(raw["num_classes_scored"].get<int>(), 20);

  ASSERT_EQ(cli("report --out " + (dir / "r").string() + " --in " + (dir / "e1" / "eval_report.json").string()), 0);
  EXPECT_NE(slurp(dir / "r" / "report.md").find("| overall |"), std::string::npos);
  EXPECT_EQ(cli("report --out " + (dir / "r").string() + " --in " + (data / "stats.json").string()), 3);
}

TEST(Cli, CurateWithRecordedResponses) {
  const auto dir = scratch("curate");
  ASSERT_EQ(cli("curate --out " + dir.string() + " --train " + (kFixtures / "train.jsonl").string() + " --space " +
                (kFixtures / "space.json").string() + " --corpus " + (kFixtures / "corpus.jsonl").string() +
                " --llm-fixture " + kFixtures.string()),
            0);
  const auto golden = tailext::read_json_file(kFixtures / "golden.json");
  const auto space = tailext::read_json_file(dir / "space.json").get<tailext::LabelSpace>();
  EXPECT_EQ(space.num_auxiliary(), golden["aux_classes"].size());
  const auto report = tailext::read_json_file(dir / "curation_report.json");
  EXPECT_EQ(report["targets"].size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "aux.header.json"));
}
