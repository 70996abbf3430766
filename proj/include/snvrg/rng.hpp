#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace snvrg {

namespace detail {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/**
 * Counter-based, splittable random stream.
 *
 * The i-th output of a stream with key k is mix64(k + i * golden), so a stream
 * is fully described by (key, counter). Child streams are derived by hashing
 * the parent key with a child index, which lets every trial, epoch, or restart
 * own an independent stream derived from one 64-bit seed without any shared
 * mutable state.
 *
 * Satisfies UniformRandomBitGenerator, so std distributions work on it.
 */
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept : key_(detail::mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return detail::mix64(key_ + detail::kGolden * ++counter_); }

  /// Independent child stream; does not advance this stream.
  [[nodiscard]] Rng split(std::uint64_t child) const noexcept {
    Rng r;
    r.key_ = detail::mix64(key_ ^ detail::mix64(child * detail::kGolden + 0x2545f4914f6cdd1dULL));
    return r;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    // 53 random mantissa bits, shifted off zero by half an ulp.
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// +1 or -1 with equal probability.
  int rademacher() noexcept { return ((*this)() >> 63) ? 1 : -1; }

  /// Standard normal via Box-Muller (no cached state, so a stream is a pure function of its counter).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace snvrg
