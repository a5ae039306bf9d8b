#include <benchmark/benchmark.h>

#include "sqra/special_functions.hpp"

namespace {

void BM_RegGammaUpper(benchmark::State& state) {
  double x = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sqra::reg_gamma_upper(10.0, x));
    x = x < 40.0 ? x + 0.37 : 0.5;
  }
}
BENCHMARK(BM_RegGammaUpper);

void BM_MarcumQ(benchmark::State& state) {
  const double a = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sqra::marcum_q(10.0, a, 4.0));
}
BENCHMARK(BM_MarcumQ)->Arg(1)->Arg(4)->Arg(10);

void BM_LogBesselI(benchmark::State& state) {
  const double x = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sqra::log_bessel_i(9.0, x));
}
BENCHMARK(BM_LogBesselI)->Arg(1)->Arg(50)->Arg(2000);

}  // namespace
