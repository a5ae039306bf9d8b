#include "sqra/random.hpp"

#include <boost/random/normal_distribution.hpp>

namespace sqra {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-style key: each (seed, index) pair maps to a well-mixed engine seed.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index ^ 0x5eed5eed5eed5eedULL));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : engine_(stream_key(seed, ~std::uint64_t{0})) {}

RandomStream RandomStream::substream(std::uint64_t seed, std::uint64_t index) {
  RandomStream stream(0);
  stream.engine_.seed(stream_key(seed, index));
  return stream;
}

double RandomStream::normal() {
  // Ziggurat sampler; stateless, so a fresh distribution per call is free.
  boost::random::normal_distribution<double> dist;
  return dist(engine_);
}

double RandomStream::uniform() { return std::generate_canonical<double, 53>(engine_); }

int RandomStream::uniform_int(int n) {
  std::uniform_int_distribution<int> dist(0, n - 1);
  return dist(engine_);
}

bool RandomStream::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform() < p;
}

int RandomStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> dist(mean);
  return dist(engine_);
}

}  // namespace sqra
