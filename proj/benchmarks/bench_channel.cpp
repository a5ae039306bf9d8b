#include <benchmark/benchmark.h>

#include "sqra/channel.hpp"
#include "sqra/random.hpp"

namespace {

void BM_SimulateFrameAloha(benchmark::State& state) {
  const int users = static_cast<int>(state.range(0));
  sqra::RandomStream rng(1);
  const auto degrees = sqra::DegreeDistribution::aloha();
  for (auto _ : state) benchmark::DoNotOptimize(sqra::simulate_frame(users, 10, degrees, rng));
}
BENCHMARK(BM_SimulateFrameAloha)->Arg(5)->Arg(20);

void BM_SimulateFrameIrsa(benchmark::State& state) {
  const int slots = static_cast<int>(state.range(0));
  sqra::RandomStream rng(2);
  const auto degrees = sqra::DegreeDistribution::regular(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sqra::simulate_frame(static_cast<int>(0.8 * slots), slots, degrees, rng));
  }
}
BENCHMARK(BM_SimulateFrameIrsa)->Arg(25)->Arg(100);

void BM_IrsaApprox(benchmark::State& state) {
  const auto degrees = sqra::DegreeDistribution::regular(3);
  const auto constants = sqra::IrsaConstants::regular3();
  for (auto _ : state) benchmark::DoNotOptimize(sqra::irsa_error_prob_approx(40.0, 50, degrees, constants));
}
BENCHMARK(BM_IrsaApprox);

}  // namespace
