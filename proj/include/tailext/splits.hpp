#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tailext/core.hpp"

namespace tailext {

/// Many-shot (> 100 training samples), medium-shot (20..100 inclusive) and
/// few-shot (< 20).
enum class Split { many, medium, few };

inline constexpr std::size_t kManyThreshold = 100;
inline constexpr std::size_t kFewThreshold = 20;

inline const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::many: return "many";
    case Split::medium: return "medium";
    case Split::few: return "few";
  }
  return "?";
}

inline std::optional<Split> split_from_string(std::string_view s) noexcept {
  if (s == "many" || s == "head") return Split::many;
  if (s == "medium" || s == "med") return Split::medium;
  if (s == "few" || s == "tail") return Split::few;
  return std::nullopt;
}

constexpr Split split_of_count(std::size_t count) noexcept {
  if (count > kManyThreshold) return Split::many;
  if (count >= kFewThreshold) return Split::medium;
  return Split::few;
}

/// Split tag per class, derived from training counts.
class SplitAssignment {
 public:
  SplitAssignment() = default;
  explicit SplitAssignment(std::vector<Split> tags) : tags_(std::move(tags)) {}

  [[nodiscard]] std::size_t size() const noexcept { return tags_.size(); }
  [[nodiscard]] Split of(ClassId c) const { return tags_.at(c); }
  [[nodiscard]] const std::vector<Split>& tags() const noexcept { return tags_; }
  [[nodiscard]] std::size_t count(Split s) const noexcept {
    std::size_t n = 0;
    for (auto t : tags_) n += t == s;
    return n;
  }

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;

 private:
  std::vector<Split> tags_;
};

inline SplitAssignment assign_splits(const ClassStats& stats) {
  std::vector<Split> tags;
  tags.reserve(stats.size());
  for (auto c : stats.counts()) tags.push_back(split_of_count(c));
  return SplitAssignment(std::move(tags));
}

}  // namespace tailext
