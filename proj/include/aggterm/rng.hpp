#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace aggterm {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based random stream. Output i is a pure function of (key, i), so a
/// stream derived from (master seed, purpose tag, indices) yields the same
/// numbers no matter which worker consumes it or in what order streams run.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) : key_(splitmix64(key)) {}

  static Stream derive(std::uint64_t master, std::string_view tag, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
    std::uint64_t k = splitmix64(master ^ 0x5851F42D4C957F2DULL);
    k = splitmix64(k ^ fnv1a(tag));
    k = splitmix64(k ^ a);
    k = splitmix64(k ^ (b * 0xD1342543DE82EF95ULL));
    return Stream(k);
  }

  /// Independent child stream; does not advance this one.
  Stream split(std::uint64_t index) const { return Stream(splitmix64(key_ ^ splitmix64(index + 1))); }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return splitmix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace aggterm
