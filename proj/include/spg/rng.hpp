#pragma once

// Deterministic random streams. Every consumer derives its own engine from
// (seed, stream tag, index), so results never depend on call order, thread
// count, or how much randomness another component consumed. mt19937_64 is
// fully specified by the standard; the double conversion below avoids the
// implementation-defined std::uniform_real_distribution.

#include <cstdint>
#include <random>
#include <vector>

namespace spg {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

enum class Stream : uint64_t {
  kParamInit = 1,
  kDataset = 2,    // per-instance generation, keyed by the dataset seed
  kSplitSeed = 3,  // derives a held-out split seed from a base seed
  kShuffle = 4,
  kExplore = 5,
  kSample = 6,
  kEval = 7,
  kDiag = 8,
  kTest = 9,
};

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n), n >= 1.
  uint64_t below(uint64_t n) {
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (size_t i = xs.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Mixes (seed, stream, index) into a fresh engine seed.
inline uint64_t derive_seed(uint64_t seed, Stream stream, uint64_t index) {
  uint64_t s = seed;
  (void)splitmix64(s);
  s ^= static_cast<uint64_t>(stream) * 0x9e3779b97f4a7c15ull;
  (void)splitmix64(s);
  s ^= index * 0xd1b54a32d192ed03ull;
  return splitmix64(s);
}

inline Rng derive_rng(uint64_t seed, Stream stream, uint64_t index) {
  return Rng(derive_seed(seed, stream, index));
}

}  // namespace spg
