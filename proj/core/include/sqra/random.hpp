#pragma once

#include <cstdint>
#include <random>

namespace sqra {

/// Explicit random stream passed to every sampling routine.
///
/// Streams are independent per (seed, index) pair so Monte Carlo trials can
/// be generated in any order, or on any worker, with identical results.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Deterministic substream for trial `index` of a run seeded with `seed`.
  static RandomStream substream(std::uint64_t seed, std::uint64_t index);

  double normal();
  double uniform();                      // [0, 1)
  int uniform_int(int n);                // [0, n)
  bool bernoulli(double p);
  int poisson(double mean);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sqra
