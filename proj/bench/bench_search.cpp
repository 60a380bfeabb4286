// Serial reference vs. OpenMP kernel for the two exhaustive searches.

#include <benchmark/benchmark.h>

#include "relv/property_lab.hpp"
#include "relv/worlds.hpp"

namespace {

using namespace relv;

const lab::StpGrid& grid() {
  static const lab::StpGrid g = lab::default_stp_grid();
  return g;
}

void BM_StpSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(lab::search_stp_violations_serial(ChoiceRule::relv(10), grid()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid().size()));
}

void BM_StpParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(lab::search_stp_violations(ChoiceRule::relv(10), grid()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid().size()));
}

void BM_PumpSerial(benchmark::State& state) {
  const auto menu = worlds::mixed_menu();
  const int depth = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lab::money_pump_search_serial(ChoiceRule::relv(10), depth, menu));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lab::pump_tree_count(menu.size(), depth)));
}

void BM_PumpParallel(benchmark::State& state) {
  const auto menu = worlds::mixed_menu();
  const int depth = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lab::money_pump_search(ChoiceRule::relv(10), depth, menu));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lab::pump_tree_count(menu.size(), depth)));
}

}  // namespace

BENCHMARK(BM_StpSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StpParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PumpSerial)->DenseRange(2, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PumpParallel)->DenseRange(2, 3)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
