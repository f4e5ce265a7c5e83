#pragma once

#include <cstdint>
#include <vector>

namespace abm {

// Counter-based pseudo-random generator.
//
// Every draw is a pure function of (seed, stream, counter): the k-th output
// is splitmix64_mix(base + (k+1) * GAMMA), so sequences are reproducible
// bit-for-bit across runs and platforms and independent draws can be taken
// from disjoint streams without sharing state. All randomness in this
// project (sampling, weight init, shuffling, baselines) flows from one
// 64-bit seed through this generator.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(mix(seed ^ mix(stream ^ kStreamSalt))) {}

  std::uint64_t next_u64() { return mix(base_ + (++counter_) * kGamma); }

  // Uniform in [0,1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform index in [0,n) via 128-bit multiply-shift.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ull;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

// Stream identifiers, one per independent consumer of randomness.
namespace rng_stream {
constexpr std::uint64_t kLhs = 1;
constexpr std::uint64_t kWeightInit = 2;   // + tensor ordinal in the low bits
constexpr std::uint64_t kShuffle = 3;      // + epoch in the low bits
constexpr std::uint64_t kReference = 4;
constexpr std::uint64_t kGradCheck = 5;

constexpr std::uint64_t sub(std::uint64_t stream, std::uint64_t ordinal) {
  return (stream << 32) | ordinal;
}
}  // namespace rng_stream

template <typename T>
void shuffle(std::vector<T>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace abm
