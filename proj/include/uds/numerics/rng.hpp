#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

namespace uds::num {

// SplitMix64 step; used to expand seeds and derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

// Stream seed for a (seed, stream) pair, e.g. per bootstrap replicant.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// xoshiro256** (Blackman & Vigna), state expanded from the seed with
// SplitMix64. uniform() uses the top 53 bits; normal() is Box-Muller
// without caching, so every call consumes exactly two draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace uds::num
