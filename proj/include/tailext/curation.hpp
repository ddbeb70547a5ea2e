#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tailext/core.hpp"
#include "tailext/parallel.hpp"
#include "tailext/splits.hpp"

namespace tailext {

// ---------------------------------------------------------------------------
// Names and prompts
// ---------------------------------------------------------------------------

/// Case-folded, trimmed, internal whitespace collapsed to single spaces.
inline std::string normalize_name(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

/// In-context prompt asking for `k` fine-grained categories related to
/// `class_name`, with the sports-car exemplar.
inline std::string build_prompt(std::string_view class_name, std::size_t k = 5) {
  if (normalize_name(class_name).empty()) throw ConfigError("empty class name in prompt");
  if (k == 0) throw ConfigError("prompt must ask for at least one category");
  std::ostringstream p;
  p << "Task: Given a category name, please list out " << k
    << " classes that are fine-grained categories related to the provided classes.\n\n"
    << "Query: sports car\n\n"
    << "Response: sedan, coupe, SUV, luxury car, electric car\n\n"
    << "Query: " << class_name << "\n\n"
    << "Response:";
  return p.str();
}

/// Extracts the class name from the last "Query:" line of a prompt built by
/// `build_prompt`. Used by replay clients to key recorded answers.
inline std::string query_of_prompt(std::string_view prompt) {
  const auto pos = prompt.rfind("Query:");
  if (pos == std::string_view::npos) return {};
  auto rest = prompt.substr(pos + 6);
  rest = rest.substr(0, rest.find('\n'));
  return normalize_name(rest);
}

/// Splits an LLM completion into normalized, de-duplicated category names.
/// Only the first non-empty line counts; a leading "Response:" is dropped and
/// trailing periods are stripped. At most `k` names are returned.
inline std::vector<std::string> parse_neighbor_response(std::string_view text, std::size_t k) {
  std::string line;
  std::istringstream in{std::string(text)};
  for (std::string l; std::getline(in, l);) {
    if (!normalize_name(l).empty()) {
      line = l;
      break;
    }
  }
  auto norm = normalize_name(line);
  if (norm.rfind("response:", 0) == 0) norm = normalize_name(norm.substr(9));
  std::vector<std::string> names;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= norm.size() && names.size() < k) {
    auto end = norm.find(',', start);
    if (end == std::string::npos) end = norm.size();
    auto name = normalize_name(norm.substr(start, end - start));
    while (!name.empty() && (name.back() == '.' || name.back() == ';')) name.pop_back();
    name = normalize_name(name);
    if (!name.empty() && seen.insert(name).second) names.push_back(name);
    start = end + 1;
  }
  return names;
}

// ---------------------------------------------------------------------------
// LLM clients
// ---------------------------------------------------------------------------

/// Text completion service. Implementations throw ServiceError on transport
/// failure and must be safe to call concurrently.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Replays recorded answers keyed by the queried class name.
///
/// The fixture directory holds `responses.json`, an object mapping class
/// names to either one answer or an array of answers returned on successive
/// calls (the last one repeats). Unknown classes are a transport failure.
class FixtureLlmClient final : public LlmClient {
 public:
  explicit FixtureLlmClient(std::map<std::string, std::vector<std::string>> responses)
      : responses_(normalize_keys(std::move(responses))) {}

  FixtureLlmClient(FixtureLlmClient&& other) noexcept
      : responses_(std::move(other.responses_)), calls_(std::move(other.calls_)) {}

  static FixtureLlmClient from_directory(const std::filesystem::path& dir) {
    const auto path = dir / "responses.json";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open LLM fixture " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed LLM fixture " + path.string() + ": " + e.what());
    }
    std::map<std::string, std::vector<std::string>> responses;
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) {
        responses[key].push_back(value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& v : value) responses[key].push_back(v.get<std::string>());
      } else {
        throw DataError("LLM fixture entry '" + key + "' must be a string or array of strings");
      }
    }
    return FixtureLlmClient(std::move(responses));
  }

  std::string complete(const std::string& prompt) override {
    const auto key = query_of_prompt(prompt);
    std::lock_guard lock(mutex_);
    const auto it = responses_.find(key);
    if (it == responses_.end() || it->second.empty()) {
      throw ServiceError("no recorded LLM response for '" + key + "'");
    }
    auto& n = calls_[key];
    const auto& list = it->second;
    const auto& answer = list[std::min(n, list.size() - 1)];
    ++n;
    return answer;
  }

  [[nodiscard]] std::size_t calls(const std::string& class_name) const {
    std::lock_guard lock(mutex_);
    const auto it = calls_.find(normalize_name(class_name));
    return it == calls_.end() ? 0 : it->second;
  }

 private:
  static std::map<std::string, std::vector<std::string>> normalize_keys(
      std::map<std::string, std::vector<std::string>> in) {
    std::map<std::string, std::vector<std::string>> out;
    for (auto& [k, v] : in) out[normalize_name(k)] = std::move(v);
    return out;
  }

  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, std::size_t> calls_;
  mutable std::mutex mutex_;
};

/// Asks `client` for `k` neighbor categories of `class_name`. A response that
/// parses to no names is retried up to `retry_limit` more times, as is a
/// transport failure.
inline std::vector<std::string> query_neighbors(LlmClient& client, std::string_view class_name,
                                                std::size_t k, std::size_t retry_limit = 2) {
  const auto prompt = build_prompt(class_name, k);
  std::string last_error;
  bool transport_failure = false;
  for (std::size_t attempt = 0; attempt <= retry_limit; ++attempt) {
    std::string text;
    try {
      text = client.complete(prompt);
    } catch (const ServiceError& e) {
      last_error = e.what();
      transport_failure = true;
      continue;
    }
    transport_failure = false;
    auto names = parse_neighbor_response(text, k);
    if (!names.empty()) return names;
    last_error = "unparseable response '" + text + "'";
  }
  const std::string msg = "neighbor query for '" + std::string(class_name) + "' failed after " +
                          std::to_string(retry_limit + 1) + " attempts: " + last_error;
  if (transport_failure) throw ServiceError(msg);
  throw ParseError(msg);
}

/// Drops names that equal (after normalization) a target class name.
inline std::vector<std::string> filter_leaks(std::span<const std::string> names,
                                             const std::set<std::string>& target_names) {
  std::set<std::string> targets;
  for (const auto& t : target_names) targets.insert(normalize_name(t));
  std::vector<std::string> out;
  for (const auto& n : names) {
    if (!targets.contains(normalize_name(n))) out.push_back(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidates and filtering
// ---------------------------------------------------------------------------

/// A retrieved image record proposed for an auxiliary class.
struct Candidate {
  std::string image_ref;
  std::string caption;
  std::vector<double> features;
  std::string proposed_class;
  ClassId source_target = 0;
};

/// Mean training feature of one class.
struct Prototype {
  ClassId class_id = 0;
  std::vector<double> mean;
};

inline Prototype compute_prototype(const FeatureDataset& dataset, ClassId class_id) {
  Prototype p{class_id, std::vector<double>(dataset.feature_dim(), 0.0)};
  std::size_t n = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.label(i) != class_id) continue;
    const auto f = dataset.features(i);
    for (std::size_t j = 0; j < f.size(); ++j) p.mean[j] += f[j];
    ++n;
  }
  if (n == 0) throw DataError("class " + std::to_string(class_id) + " has no samples for a prototype");
  for (auto& v : p.mean) v /= static_cast<double>(n);
  return p;
}

/// dot(a, b) / (|a| |b|) on the raw vectors.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine between vectors of length " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("cosine similarity with a zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

enum class CaptionMatch { substring, whole_word };

/// Whether the normalized `name` occurs in the normalized caption.
inline bool caption_mentions(std::string_view caption, std::string_view name,
                             CaptionMatch mode = CaptionMatch::substring) {
  const auto c = normalize_name(caption);
  const auto n = normalize_name(name);
  if (n.empty()) return false;
  for (std::size_t pos = c.find(n); pos != std::string::npos; pos = c.find(n, pos + 1)) {
    if (mode == CaptionMatch::substring) return true;
    auto is_word = [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; };
    const bool left = pos == 0 || !is_word(c[pos - 1]);
    const bool right = pos + n.size() == c.size() || !is_word(c[pos + n.size()]);
    if (left && right) return true;
  }
  return false;
}

enum class RejectReason { leak, caption, similarity_low, similarity_high };

inline const char* to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::leak: return "leak";
    case RejectReason::caption: return "caption";
    case RejectReason::similarity_low: return "similarity-low";
    case RejectReason::similarity_high: return "similarity-high";
  }
  return "?";
}

struct FilterConfig {
  double gamma1 = 0.7;
  double gamma2 = 0.98;
  CaptionMatch caption_mode = CaptionMatch::substring;

  void validate() const {
    if (!(gamma1 >= 0.0 && gamma1 < gamma2 && gamma2 <= 1.0)) {
      throw ConfigError("gamma thresholds must satisfy 0 <= gamma1 < gamma2 <= 1");
    }
  }
};

struct Rejection {
  Candidate candidate;
  RejectReason reason;
  std::optional<double> cosine;  ///< absent when rejected before the similarity check
};

/// Outcome of one candidate, in input order.
struct FilterDecision {
  std::size_t index = 0;
  bool kept = false;
  std::optional<RejectReason> reason;
  std::optional<double> cosine;
};

struct FilterResult {
  std::vector<Candidate> kept;
  std::vector<Rejection> rejected;
  std::vector<FilterDecision> decisions;
};

/// Keeps a candidate iff its caption mentions the proposed class and
/// gamma1 < cos(prototype of its source target, feature) < gamma2. The caption
/// rule is checked first. Both output lists preserve input order.
inline FilterResult filter_candidates(std::span<const Candidate> cands,
                                      const std::map<ClassId, Prototype>& protos, const FilterConfig& cfg) {
  cfg.validate();
  FilterResult out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    FilterDecision d{i, false, std::nullopt, std::nullopt};
    if (!caption_mentions(c.caption, c.proposed_class, cfg.caption_mode)) {
      d.reason = RejectReason::caption;
    } else {
      const auto it = protos.find(c.source_target);
      if (it == protos.end()) {
        throw DataError("no prototype for target class " + std::to_string(c.source_target));
      }
      const double cos = cosine_similarity(it->second.mean, c.features);
      d.cosine = cos;
      if (cos <= cfg.gamma1) {
        d.reason = RejectReason::similarity_low;
      } else if (cos >= cfg.gamma2) {
        d.reason = RejectReason::similarity_high;
      } else {
        d.kept = true;
      }
    }
    if (d.kept) {
      out.kept.push_back(c);
    } else {
      out.rejected.push_back(Rejection{c, *d.reason, d.cosine});
    }
    out.decisions.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

/// Image search backend. Returned candidates carry image_ref, caption and
/// (when available) features; curation fills in proposed_class and
/// source_target. Implementations must be safe to call concurrently.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<Candidate> search(const std::string& class_name, std::size_t limit) = 0;
};

/// Computes features for candidates that arrive without them.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const Candidate& candidate) = 0;
};

/// Serves a JSONL candidate corpus, one record per line:
/// {"class": str, "image_ref": str, "caption": str, "features": [...]}.
class FixtureRetriever final : public Retriever {
 public:
  struct Record {
    std::string class_name;  ///< normalized
    Candidate candidate;
  };

  explicit FixtureRetriever(std::vector<Record> records) : records_(std::move(records)) {}

  static FixtureRetriever from_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open candidate corpus " + path.string());
    std::vector<Record> records;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (normalize_name(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        Record r;
        r.class_name = normalize_name(j.at("class").get<std::string>());
        r.candidate.image_ref = j.at("image_ref").get<std::string>();
        r.candidate.caption = j.value("caption", std::string{});
        if (j.contains("features")) r.candidate.features = j.at("features").get<std::vector<double>>();
        records.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return FixtureRetriever(std::move(records));
  }

  std::vector<Candidate> search(const std::string& class_name, std::size_t limit) override {
    const auto key = normalize_name(class_name);
    std::vector<Candidate> out;
    for (const auto& r : records_) {
      if (out.size() >= limit) break;
      if (r.class_name == key) out.push_back(r.candidate);
    }
    return out;
  }

  [[nodiscard]] const std::vector<Record>& records() const noexcept { return records_; }

 private:
  std::vector<Record> records_;
};

// ---------------------------------------------------------------------------
// End-to-end curation
// ---------------------------------------------------------------------------

struct CurationConfig {
  std::size_t neighbors_per_target = 5;
  std::size_t retry_limit = 2;
  std::size_t retrieval_limit = 200;
  std::size_t max_concurrency = 8;
  FilterConfig filter;
  /// Targets to expand, by split of their training count.
  std::vector<Split> expand = {Split::medium, Split::few};
};

struct CandidateDecision {
  std::string image_ref;
  std::string proposed_class;
  ClassId source_target = 0;
  bool kept = false;
  std::optional<RejectReason> reason;
  std::optional<double> cosine;
};

/// Stage counts for one expanded target.
struct TargetCurationReport {
  ClassId target = 0;
  std::string name;
  std::vector<std::string> proposed;
  std::vector<std::string> leaked;
  std::vector<std::string> duplicates;  ///< already claimed by an earlier target
  std::size_t retrieved = 0;
  std::size_t rejected_caption = 0;
  std::size_t rejected_low = 0;
  std::size_t rejected_high = 0;
  std::size_t kept = 0;
  std::vector<ClassId> aux_classes;
};

struct CurationReport {
  std::vector<TargetCurationReport> targets;
  std::vector<CandidateDecision> decisions;
  std::vector<std::string> warnings;
};

struct CurationResult {
  FeatureDataset aux;
  LabelSpace space;
  CurationReport report;
};

/// Prompt -> query -> leak filter -> retrieve -> caption and similarity
/// filter, for every expanded target of `space` (which must carry class names
/// for all targets). Each surviving neighbor name with at least one kept
/// image becomes an auxiliary class of its source target. A name proposed by
/// several targets belongs to the lowest target id.
inline CurationResult curate(const LabelSpace& space, const FeatureDataset& dataset, LlmClient& client,
                             Retriever& retriever, const CurationConfig& cfg, Embedder* embedder = nullptr) {
  cfg.filter.validate();
  if (space.num_auxiliary() != 0) throw ConfigError("curation starts from a target-only label space");
  const std::size_t L = space.num_target();
  std::set<std::string> target_names;
  for (ClassId c = 0; c < L; ++c) {
    auto nm = space.name_of(c);
    if (!nm) throw DataError("target class " + std::to_string(c) + " has no name");
    target_names.insert(normalize_name(*nm));
  }
  const auto counts = dataset.class_counts(L);
  std::vector<ClassId> expanded;
  for (ClassId c = 0; c < L; ++c) {
    if (counts[c] == 0) continue;
    const auto s = split_of_count(counts[c]);
    if (std::find(cfg.expand.begin(), cfg.expand.end(), s) != cfg.expand.end()) expanded.push_back(c);
  }

  const auto proposals = bounded_map(expanded.size(), cfg.max_concurrency, [&](std::size_t i) {
    return query_neighbors(client, *space.name_of(expanded[i]), cfg.neighbors_per_target, cfg.retry_limit);
  });

  CurationResult result;
  result.aux = FeatureDataset(dataset.feature_dim(), Provenance::ingested);
  std::vector<ClassId> neighbors;
  std::map<ClassId, std::string> names = space.class_names();
  std::set<std::string> claimed;

  struct Job {
    std::size_t target_slot;
    std::string name;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    TargetCurationReport tr;
    tr.target = expanded[i];
    tr.name = *space.name_of(expanded[i]);
    tr.proposed = proposals[i];
    const auto clean = filter_leaks(proposals[i], target_names);
    for (const auto& n : proposals[i]) {
      if (std::find(clean.begin(), clean.end(), n) == clean.end()) tr.leaked.push_back(n);
    }
    for (const auto& n : clean) {
      if (!claimed.insert(n).second) {
        tr.duplicates.push_back(n);
        continue;
      }
      jobs.push_back(Job{i, n});
    }
    result.report.targets.push_back(std::move(tr));
  }

  auto retrieved = bounded_map(jobs.size(), cfg.max_concurrency, [&](std::size_t j) {
    auto cands = retriever.search(jobs[j].name, cfg.retrieval_limit);
    for (auto& c : cands) {
      c.proposed_class = jobs[j].name;
      c.source_target = expanded[jobs[j].target_slot];
      if (c.features.empty()) {
        if (embedder == nullptr) throw DataError("candidate '" + c.image_ref + "' has no features");
        c.features = embedder->embed(c);
      }
    }
    return cands;
  });

  std::map<ClassId, Prototype> protos;
  for (ClassId c : expanded) protos.emplace(c, compute_prototype(dataset, c));

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& tr = result.report.targets[jobs[j].target_slot];
    const auto& cands = retrieved[j];
    for (const auto& c : cands) {
      if (c.features.size() != dataset.feature_dim()) {
        throw DataError("candidate '" + c.image_ref + "' has feature dimension " +
                        std::to_string(c.features.size()));
      }
    }
    tr.retrieved += cands.size();
    const auto filtered = filter_candidates(cands, protos, cfg.filter);
    for (const auto& d : filtered.decisions) {
      const auto& c = cands[d.index];
      result.report.decisions.push_back(
          CandidateDecision{c.image_ref, c.proposed_class, c.source_target, d.kept, d.reason, d.cosine});
      if (d.reason == RejectReason::caption) ++tr.rejected_caption;
      if (d.reason == RejectReason::similarity_low) ++tr.rejected_low;
      if (d.reason == RejectReason::similarity_high) ++tr.rejected_high;
    }
    if (filtered.kept.empty()) continue;
    const ClassId id = L + neighbors.size();
    neighbors.push_back(tr.target);
    names.emplace(id, jobs[j].name);
    tr.aux_classes.push_back(id);
    tr.kept += filtered.kept.size();
    for (const auto& c : filtered.kept) result.aux.add(c.features, id, c.image_ref);
  }

  for (const auto& tr : result.report.targets) {
    if (tr.kept == 0) {
      result.report.warnings.push_back("target " + std::to_string(tr.target) + " ('" + tr.name +
                                       "') yielded no auxiliary samples");
    }
  }
  if (result.aux.empty()) result.report.warnings.push_back("curation produced an empty auxiliary set");
  result.space = LabelSpace(L, std::move(neighbors), std::move(names));
  return result;
}

}  // namespace tailext
