#pragma once

#include <cstdint>
#include <vector>

namespace plastisort {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Used to whiten seeds and
// to derive independent sub-seeds from (seed, tag) pairs so that every
// consumer of randomness in the pipeline is reproducible in isolation.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ tag);
}

// Fixed stream tags, one per randomness consumer. Keeping them distinct means
// e.g. changing the shuffle policy never perturbs weight initialization.
namespace rng_stream {
constexpr uint64_t kWeights = 0x5748u;  // init_weights
constexpr uint64_t kShuffle = 0x53464cu; // make_batches permutations
constexpr uint64_t kDropout = 0x44524fu; // dropout masks
constexpr uint64_t kSplit = 0x53504cu;   // dataset split draws
constexpr uint64_t kSynth = 0x53594eu;   // synthetic data generation
} // namespace rng_stream

// PCG32 (pcg_xsh_rr_64_32, O'Neill 2014). Chosen over std::mt19937 because
// its output sequence is fully specified and identical on every platform,
// which the reproducibility contract of this project depends on.
class Pcg32 {
public:
  Pcg32() : Pcg32(0x853C49E6748FEA9Bull, 0xDA3E39CB94B95BDBull) {}

  Pcg32(uint64_t initstate, uint64_t initseq) {
    state_ = 0u;
    inc_ = (initseq << 1u) | 1u;
    next_u32();
    state_ += initstate;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  // Unbiased bounded draw by rejection (the pcg_basic recipe).
  uint32_t bounded(uint32_t n) {
    if (n <= 1) return 0;
    uint32_t threshold = (0u - n) % n;
    for (;;) {
      uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

  // 53-bit uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
  uint64_t state_;
  uint64_t inc_;
};

// In-place Fisher-Yates shuffle. Draw order is pinned (i = n-1 .. 1, swap
// with bounded(i+1)), so a given generator state always yields the same
// permutation.
template <class T>
void shuffle(std::vector<T>& v, Pcg32& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng.bounded(static_cast<uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

inline std::vector<int> identity_permutation(int n) {
  std::vector<int> p(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
  return p;
}

} // namespace plastisort
