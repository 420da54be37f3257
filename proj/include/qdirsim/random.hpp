#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qdirsim/error.hpp"

namespace qdirsim {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed-splitting rule: the generator for (seed, stream) is seeded with
/// splitmix64(splitmix64(seed) ^ (stream + 1)). Streams are partitions,
/// sweep points or purposes; the result never depends on worker count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream + 1));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Geometric draw on {1, 2, ...} with the given mean (>= 1).
inline std::uint64_t geometric_gap(Rng& rng, double mean) {
  if (mean <= 1.0) return 1;
  const double p = 1.0 / mean;
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
}

/// Inverse-CDF sampler over a flattened discrete distribution.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> weights) : cdf_(weights.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] < 0.0 || !std::isfinite(weights[i])) {
        throw DomainError("measurement", "negative or non-finite probability weight");
      }
      acc += weights[i];
      cdf_[i] = acc;
    }
    if (!(acc > 0.0)) throw NullStateError("measurement", "cannot sample from a zero distribution");
    total_ = acc;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng) * total_;
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    // upper_bound never lands on a zero-weight cell: its CDF entry equals its predecessor's.
    if (it == cdf_.end()) --it;
    return static_cast<std::size_t>(it - cdf_.begin());
  }

  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
  double total_ = 0.0;
};

}  // namespace qdirsim
