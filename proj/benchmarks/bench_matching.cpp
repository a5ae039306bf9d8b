#include <benchmark/benchmark.h>

#include "sqra/experiment.hpp"

namespace {

const sqra::Experiment& world(bool irsa) {
  static const auto make = [](bool use_irsa) {
    sqra::ExperimentConfig c;
    if (use_irsa) c.degrees = sqra::DegreeDistribution::regular(3);
    return sqra::Experiment(c);
  };
  static const sqra::Experiment aloha = make(false);
  static const sqra::Experiment irsa_world = make(true);
  return irsa ? irsa_world : aloha;
}

void BM_FaMatch(benchmark::State& state) {
  const auto& cf = world(false).closed_form();
  double tau = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cf.fa_match(tau));
    tau = tau < 0.95 ? tau + 0.01 : 0.05;
  }
}
BENCHMARK(BM_FaMatch);

void BM_Psi(benchmark::State& state) {
  const auto& params = world(false).closed_form().params();
  for (auto _ : state) benchmark::DoNotOptimize(sqra::psi(0.2, params, 10));
}
BENCHMARK(BM_Psi);

void BM_SolveAloha(benchmark::State& state) {
  const auto& params = world(false).closed_form().params();
  for (auto _ : state) benchmark::DoNotOptimize(sqra::solve_threshold_aloha(params, 10));
}
BENCHMARK(BM_SolveAloha)->Unit(benchmark::kMillisecond);

void BM_SolveIrsa(benchmark::State& state) {
  const auto& exp = world(true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sqra::solve_threshold_irsa(exp.closed_form(), exp.population(), exp.channel(), 10));
  }
}
BENCHMARK(BM_SolveIrsa)->Unit(benchmark::kMillisecond);

}  // namespace
