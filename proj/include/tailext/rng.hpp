#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>

namespace tailext {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based generator: the i-th output is a pure function of (key, i).
///
/// Streams are derived by hashing a path of tags into the key, so any module
/// can obtain an independent reproducible stream from the run seed without
/// coordinating with other consumers:
///
///     auto rng = Rng(seed).split("aux-sample").split(epoch).split(cls);
///
/// All distributions are implemented here rather than with <random> so that
/// generated data is identical across standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(std::uint64_t seed) noexcept
      : key_(detail::splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  [[nodiscard]] constexpr Rng split(std::uint64_t tag) const noexcept {
    Rng r(0);
    r.key_ = detail::splitmix64(key_ ^ detail::splitmix64(tag + 0x3c6ef372fe94f82bULL));
    return r;
  }
  [[nodiscard]] constexpr Rng split(std::string_view tag) const noexcept {
    return split(detail::fnv1a(tag));
  }
  [[nodiscard]] constexpr Rng split(const char* tag) const noexcept {
    return split(std::string_view(tag));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return detail::splitmix64(key_ ^ detail::splitmix64(counter_++));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one variate per call, no cached state).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Unbiased integer in [0, n) by rejection. `n` must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return x % n;
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tailext
