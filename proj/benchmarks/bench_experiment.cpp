#include <benchmark/benchmark.h>

#include "sqra/experiment.hpp"

namespace {

void BM_RunTrial(benchmark::State& state) {
  const sqra::Experiment exp{sqra::ExperimentConfig{}};
  const auto policy = sqra::TransmitPolicy::semantic(0.2);
  const bool inference = state.range(0) != 0;
  std::uint64_t i = 0;
  for (auto _ : state) {
    sqra::RandomStream rng = sqra::RandomStream::substream(1, i++);
    benchmark::DoNotOptimize(exp.run_trial(policy, rng, inference));
  }
}
BENCHMARK(BM_RunTrial)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_SampleScores(benchmark::State& state) {
  const sqra::Experiment exp{sqra::ExperimentConfig{}};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sqra::sample_match_scores(exp, 1000, 1000, seed++));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_SampleScores)->Unit(benchmark::kMicrosecond);

}  // namespace
