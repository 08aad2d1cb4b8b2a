// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "agropanel/rng.hpp"
#include "agropanel/thermal.hpp"

using namespace agropanel;

namespace {

void SineAndBin(benchmark::State& state) {
  const int days = static_cast<int>(state.range(0));
  Rng rng(3);
  std::vector<double> tmin(days), tmax(days);
  for (int d = 0; d < days; ++d) {
    tmin[d] = rng.uniform(5, 20);
    tmax[d] = tmin[d] + rng.uniform(2, 18);
  }
  BinGrid bins{-10.0, 50.0, 1.0, true, true};
  for (auto _ : state) {
    auto series = sine_series(tmin, tmax);
    auto z = bin_exposure(series, bins);
    benchmark::DoNotOptimize(z.z.data());
  }
  state.SetItemsProcessed(state.iterations() * days * (1440 / 15));
}
BENCHMARK(SineAndBin)->Arg(31)->Arg(183);

void DegreeDaysExact(benchmark::State& state) {
  Rng rng(4);
  const int days = 183;
  std::vector<double> tmin(days), tmax(days);
  for (int d = 0; d < days; ++d) {
    tmin[d] = rng.uniform(5, 20);
    tmax[d] = tmin[d] + rng.uniform(2, 18);
  }
  auto series = sine_series(tmin, tmax);
  for (auto _ : state) {
    double dd = degree_days_exact(series, 8.0, 30.0);
    benchmark::DoNotOptimize(dd);
  }
}
BENCHMARK(DegreeDaysExact);

}  // namespace
