// OpenMP pair kernel against the serial reference loop, same layout and table.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <cmath>
#include <vector>

#include "fpc/pair_kernels.hpp"

namespace {

struct Fixture {
  fpc::PairLayout layout;
  std::vector<double> table, u, grad;

  Fixture(std::size_t nx, std::size_t ny, bool mirror) {
    const std::vector<std::size_t> counts{nx, ny};
    layout = mirror ? fpc::PairLayout::mirrored(counts) : fpc::PairLayout::whole(counts);
    table.resize(layout.table_size());
    for (std::size_t i = 0; i < table.size(); ++i) table[i] = 1.0 / (1.0 + static_cast<double>(i));
    u.resize(layout.size());
    grad.resize(layout.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(0.001 * static_cast<double>(i)) + 1.5;
  }
};

void set_pairs(benchmark::State& state, std::size_t n) {
  state.counters["pairs/s"] =
      benchmark::Counter(0.5 * static_cast<double>(n) * static_cast<double>(n), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_pair_energy(benchmark::State& state) {
  Fixture f(state.range(0), state.range(0) / 2, state.range(1) != 0);
  const double p = state.range(2) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(fpc::pair_energy(f.layout, f.table.data(), f.u.data(), p, f.grad.data()));
  set_pairs(state, f.layout.size());
  state.counters["threads"] = omp_get_max_threads();
}

void BM_pair_energy_reference(benchmark::State& state) {
  Fixture f(state.range(0), state.range(0) / 2, state.range(1) != 0);
  const double p = state.range(2) / 10.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(fpc::pair_energy_reference(f.layout, f.table.data(), f.u.data(), p, f.grad.data()));
  set_pairs(state, f.layout.size());
}

// args: nx, mirrored, 10 p
void args(benchmark::internal::Benchmark* b) {
  for (int n : {32, 64})
    for (int m : {0, 1})
      for (int p : {15, 20, 30}) b->Args({n, m, p});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_pair_energy)->Apply(args);
BENCHMARK(BM_pair_energy_reference)->Apply(args);

BENCHMARK_MAIN();
