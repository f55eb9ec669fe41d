// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace msgl {

/// Counter-based random stream: draw i is a SplitMix64 hash of (seed, i).
///
/// The sequence depends only on the seed and the number of draws taken, so
/// two streams built from the same seed and consumed in the same order yield
/// identical samples on every platform. Distribution sampling is implemented
/// here rather than through <random> because the standard distributions are
/// implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  bool bernoulli(double p);
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent child stream; used to hand each worker its own sequence.
  RngStream fork(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace msgl
