// Copyright 2026 The klamp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KLAMP_RNG_HPP
#define KLAMP_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace klamp {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 output function.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Combines two 64-bit values into a derived seed.
inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + kGoldenGamma));
}

// FNV-1a, 64 bit.
inline constexpr std::uint64_t fnv1a64(const char *data, std::size_t n) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based generator: the i-th output is mix64(key + i * gamma) with
// key = mix64(seed). Outputs depend only on (seed, i), so sequences are
// identical on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix64(seed)) {}

  std::uint64_t next() {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Weighted sampling without replacement by sequential draws: each draw
// picks index i with probability w_i / (sum of remaining weights), then
// removes i. Returns min(k, n) distinct indices in draw order. Remaining
// weights that are all zero fall back to uniform choice.
inline std::vector<std::size_t> sample_without_replacement(
    std::span<const double> weights, std::size_t k, CounterRng &rng) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out;
  std::vector<bool> taken(n, false);
  const std::size_t draws = k < n ? k : n;
  out.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    double total = 0.0;
    std::size_t remaining = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      total += weights[i] > 0.0 ? weights[i] : 0.0;
      ++remaining;
    }
    const double u = rng.uniform();
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = u * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || !(weights[i] > 0.0)) continue;
        cum += weights[i];
        pick = i;
        if (target < cum) break;
      }
    } else {
      std::size_t nth = static_cast<std::size_t>(u * remaining);
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (nth-- == 0) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = true;
    out.push_back(pick);
  }
  return out;
}

}  // namespace klamp

#endif  // KLAMP_RNG_HPP
