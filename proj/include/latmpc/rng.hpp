#ifndef LATMPC_RNG_HPP
#define LATMPC_RNG_HPP

#include <cstdint>

namespace latmpc {

// splitmix64: tiny, fast, and bit-stable across platforms. Streams are
// derived from (seed, a, b, c) identifiers so that parallel and serial
// evaluation orders draw identical numbers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    std::uint64_t s = mix(seed);
    s = mix(s ^ mix(a + 0x243f6a8885a308d3ULL));
    s = mix(s ^ mix(b + 0x13198a2e03707344ULL));
    s = mix(s ^ mix(c + 0xa4093822299f31d0ULL));
    return Rng(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

}  // namespace latmpc

#endif  // LATMPC_RNG_HPP
