#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <vector>

namespace tailext {

/// Runs `fn(i)` for i in [0, n) with at most `limit` tasks in flight and
/// returns the results in index order. `limit` <= 1 runs inline.
template <typename Fn>
auto bounded_map(std::size_t n, std::size_t limit, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  if (limit <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
  }
  for (std::size_t start = 0; start < n; start += limit) {
    const std::size_t end = std::min(n, start + limit);
    std::vector<std::future<R>> wave;
    for (std::size_t i = start; i < end; ++i) wave.push_back(std::async(std::launch::async, fn, i));
    for (auto& f : wave) out.push_back(f.get());
  }
  return out;
}

}  // namespace tailext
