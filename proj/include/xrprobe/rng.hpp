#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <numbers>
#include <utility>

namespace xrprobe {

/// SplitMix64 finalizer. Bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a stream key from a seed and any number of stream coordinates,
/// e.g. (seed, class index) or (seed, resample index, attempt).
constexpr std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t key = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t p : parts) key = mix64(key ^ mix64(p + 0x9E3779B97F4A7C15ULL));
  return key;
}

/// Counter-based generator: the i-th output is a pure function of (key, i).
/// Output sequences are identical on every platform and compiler, unlike the
/// standard library distributions.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t operator()() noexcept {
    return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift reduction, n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; one output per two uniforms.
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by a CounterRng.
template <class Range>
void shuffle(Range& r, CounterRng& rng) {
  using std::swap;
  const auto n = static_cast<std::uint64_t>(std::size(r));
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    swap(r[i - 1], r[j]);
  }
}

}  // namespace xrprobe
