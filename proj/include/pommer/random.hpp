#ifndef POMMER_RANDOM_HPP_
#define POMMER_RANDOM_HPP_

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>

namespace pommer {

// SplitMix64 finalizer. Used to derive child seeds; never as a stream itself.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) {
  return mix64(mix64(parent) ^ (key * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view key) {
  return derive_seed(parent, fnv1a(key));
}

// Without this a string literal would pick the integer overload ambiguously.
constexpr std::uint64_t derive_seed(std::uint64_t parent, const char* key) {
  return derive_seed(parent, std::string_view(key));
}

/// Seedable, splittable random stream.
///
/// Backed by std::mt19937_64, whose output sequence is fixed by the standard.
/// Bounded draws are done here rather than with <random> distributions so
/// that every stream is reproducible across standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream keyed by `key`; does not advance this stream.
  Rng split(std::uint64_t key) const { return Rng(derive_seed(seed_, key)); }
  Rng split(std::string_view name) const { return split(fnv1a(name)); }

  /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Index drawn proportionally to non-negative `weights`.
  template <typename W>
  std::size_t categorical(std::span<const W> weights) {
    double total = 0.0;
    for (const W w : weights) total += static_cast<double>(w);
    double u = uniform01() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= static_cast<double>(weights[i]);
      if (u < 0.0) return i;
    }
    // Rounding fallthrough: last index with positive weight.
    for (std::size_t i = weights.size(); i > 0; --i) {
      if (weights[i - 1] > W(0)) return i - 1;
    }
    return 0;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace pommer

#endif  // POMMER_RANDOM_HPP_
