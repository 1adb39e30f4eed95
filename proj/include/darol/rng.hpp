#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace darol::rng {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used both as the per-draw
// output function and as the hash that derives substream keys, so the whole
// generator is a pure function of (seed, stream, draw index).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^
               mix64(stream + 0x632be59bd9b4e019ULL));
}

// Counter-based stream: draw i is mix64(key + (i+1)*GOLDEN). Streams derived
// from the same (seed, stream id) are bit-identical regardless of how many
// other streams were consumed, which is what makes parallel generation agree
// with serial generation.
class Stream {
 public:
  Stream() : key_(0), counter_(0) {}
  Stream(std::uint64_t seed, std::uint64_t stream)
      : key_(derive_key(seed, stream)), counter_(0) {}

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix64(key_ + counter_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double next_open() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Box-Muller; the paired value is cached so consecutive draws cost one
  // transform per two samples.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw exactly uniform.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Fisher-Yates; spelled out here because std::shuffle's draw sequence is
  // implementation-defined.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Stream substream(std::uint64_t seed, std::uint64_t index) {
  return Stream(seed, index);
}

}  // namespace darol::rng
