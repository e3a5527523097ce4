/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

namespace curpo {

/// splitmix64 finalizer; also used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Named consumers of randomness. Each consumer draws from its own stream so
/// adding draws in one place never shifts another.
enum class Stream : std::uint64_t {
  Init = 1,
  Taskgen = 2,
  Cots = 3,
  Scoring = 4,
  Batch = 5,
  Rollout = 6,
  Sort = 7,
};

/// Seed for stream `s`, sub-index `index` (sample id, step, ...) under `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, Stream s,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t h = splitmix64(base ^ (static_cast<std::uint64_t>(s) << 56));
  return splitmix64(h ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Parallel rollout workers: worker k of a schedule seeded with `base` uses
/// base ^ k. A worker assigned deterministically reproduces sequential output.
constexpr std::uint64_t worker_seed(std::uint64_t base,
                                    std::uint64_t worker_index) noexcept {
  return base ^ worker_index;
}

/// xoshiro256** with splitmix64 seeding. Distributions are implemented here
/// rather than with <random> so streams are identical across standard
/// libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept {
    std::uint64_t x = seed;
    for (auto& word : s_) {
      x += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      word = z ^ (z >> 31);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, n). Lemire's rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const unsigned __int128 m =
          static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n);
      if (static_cast<std::uint64_t>(m) >= threshold)
        return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Standard normal via Box-Muller (cosine branch only, no cached pair).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept {
    return mean + stddev * normal();
  }

  /// Index drawn from a probability vector by inverse CDF.
  std::size_t categorical(std::span<const double> probs) noexcept {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return k;
    }
    // u landed in the rounding slack above the last partial sum
    for (std::size_t k = probs.size(); k-- > 0;)
      if (probs[k] > 0.0) return k;
    return probs.size() - 1;
  }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
};

}  // namespace curpo
