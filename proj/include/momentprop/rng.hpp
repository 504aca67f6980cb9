#pragma once

#include <cmath>
#include <cstdint>

namespace momentprop {

namespace detail {

// 64-bit avalanche mixer (murmur3 finalizer). Bijective on uint64.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

}  // namespace detail

// Names one reproducible random stream. The same (seed, stream) pair always
// produces the same draw sequence, independent of any other stream, which
// keeps ensemble runs and benchmark splits replayable under parallel
// scheduling.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  // Derives a child stream by folding a key into the stream id.
  [[nodiscard]] constexpr RngStream sub(std::uint64_t key) const {
    return RngStream{seed, detail::mix64(stream ^ detail::mix64(key + 0x9e3779b97f4a7c15ULL))};
  }
};

// splitmix64 walk seeded from an RngStream. Self-contained so that draw
// sequences do not depend on the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(RngStream stream)
      : state_(detail::mix64(stream.seed) ^ detail::mix64(detail::mix64(stream.stream) + 0x9e3779b97f4a7c15ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform draw on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal draw, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // True with probability p.
  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace momentprop
