// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "agropanel/aggregate.hpp"
#include "agropanel/rng.hpp"

using namespace agropanel;

namespace {

// One cell per unit block, weights normalized inside from_triplets.
ProjectionMatrix synthetic_projection(std::size_t n_units,
                                      std::size_t n_cells) {
  std::vector<std::string> ids(n_units);
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(n_cells);
  Rng rng(99);
  for (std::size_t u = 0; u < n_units; ++u) ids[u] = "u" + std::to_string(u);
  for (std::size_t c = 0; c < n_cells; ++c) {
    entries.emplace_back(c % n_units, c, 0.5 + rng.uniform());
  }
  return ProjectionMatrix::from_triplets(std::move(ids), n_cells, entries);
}

void ProjectLayer(benchmark::State& state) {
  const std::size_t n_cells = static_cast<std::size_t>(state.range(0));
  const std::size_t n_units = 3000;
  auto p = synthetic_projection(n_units, n_cells);
  Rng rng(7);
  std::vector<double> layer(n_cells);
  for (auto& v : layer) v = rng.uniform(-10, 40);
  std::vector<double> out(n_units);
  for (auto _ : state) {
    p.project_layer(layer, -9999.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(n_cells));
}
BENCHMARK(ProjectLayer)->Arg(1 << 16)->Arg(1 << 20);

}  // namespace
