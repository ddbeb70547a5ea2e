#pragma once

// Runs curation over the recorded fixture and compares every candidate's
// outcome with the independently computed golden file.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tailext/io.hpp"
#include "tailext/tailext.hpp"

namespace tailext::testing {

inline std::filesystem::path curation_fixture_dir() { return std::filesystem::path(TAILEXT_FIXTURES) / "curation"; }

struct GoldenOutcome {
  std::vector<std::string> mismatches;
  std::size_t kept = 0;
  std::size_t rejected = 0;
  std::size_t unretrieved = 0;
  std::size_t corpus = 0;
  CurationResult result;
};

inline GoldenOutcome run_curation_golden(std::size_t concurrency = 4) {
  const auto dir = curation_fixture_dir();
  const auto golden = read_json_file(dir / "golden.json");
  const auto train = read_manifest(dir / "train.jsonl");
  const auto space = read_json_file(dir / "space.json").get<LabelSpace>();
  auto client = FixtureLlmClient::from_directory(dir);
  auto retriever = FixtureRetriever::from_jsonl(dir / "corpus.jsonl");
  CurationConfig cfg;
  cfg.max_concurrency = concurrency;
  cfg.filter.gamma1 = golden.at("gamma1").get<double>();
  cfg.filter.gamma2 = golden.at("gamma2").get<double>();

  GoldenOutcome out{{}, 0, 0, 0, retriever.records().size(), curate(space, train.data, client, retriever, cfg)};
  auto miss = [&](const std::string& m) { out.mismatches.push_back(m); };

  std::map<std::string, const CandidateDecision*> seen;
  for (const auto& d : out.result.report.decisions) {
    if (!seen.emplace(d.image_ref, &d).second) miss(d.image_ref + " decided twice");
  }
  for (const auto& [ref, g] : golden.at("candidates").items()) {
    const auto it = seen.find(ref);
    if (!g.at("retrieved").get<bool>()) {
      ++out.unretrieved;
      if (it != seen.end()) miss(ref + " should not be retrieved");
      continue;
    }
    if (it == seen.end()) {
      miss(ref + " was not retrieved");
      continue;
    }
    const auto& d = *it->second;
    const bool kept = g.at("kept").get<bool>();
    (kept ? out.kept : out.rejected) += d.kept == kept;
    if (d.kept != kept) miss(ref + (kept ? " should be kept" : " should be rejected"));
    if (d.source_target != g.at("target").get<ClassId>()) miss(ref + " attributed to the wrong target");
    if (d.proposed_class != g.at("proposed_class").get<std::string>()) miss(ref + " has the wrong proposed class");
    if (!kept) {
      const auto want = g.at("reason").get<std::string>();
      const std::string got = d.reason ? to_string(*d.reason) : "none";
      if (got != want) miss(ref + " rejected for " + got + ", expected " + want);
    }
    if (g.contains("cosine") && (!d.cosine || std::abs(*d.cosine - g.at("cosine").get<double>()) > 1e-9)) {
      miss(ref + " cosine differs");
    }
  }
  if (seen.size() != out.kept + out.rejected) miss("decisions for candidates outside the golden set");

  const auto& aux = golden.at("aux_classes");
  const auto& rs = out.result.space;
  if (rs.num_auxiliary() != aux.size()) {
    miss("expected " + std::to_string(aux.size()) + " auxiliary classes, got " + std::to_string(rs.num_auxiliary()));
  } else {
    for (std::size_t k = 0; k < aux.size(); ++k) {
      const ClassId id = rs.num_target() + k;
      if (rs.name_of(id).value_or("") != aux[k].at("name").get<std::string>() ||
          rs.neighbor_of(id) != aux[k].at("target").get<ClassId>()) {
        miss("auxiliary class " + std::to_string(id) + " differs");
      }
      std::vector<std::string> images;
      for (std::size_t i = 0; i < out.result.aux.size(); ++i) {
        if (out.result.aux.label(i) == id) images.push_back(out.result.aux.id(i));
      }
      if (images != aux[k].at("images").get<std::vector<std::string>>()) {
        miss("auxiliary class " + std::to_string(id) + " holds the wrong images");
      }
    }
  }
  return out;
}

}  // namespace tailext::testing
