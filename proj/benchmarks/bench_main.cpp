#include <benchmark/benchmark.h>

#include <vector>

#include "efat/faultmap.hpp"
#include "efat/fusion.hpp"
#include "efat/mapping.hpp"
#include "efat/tinynet.hpp"
#include "support/synthetic_table.hpp"

using namespace efat;

static void BM_GenerateFaultMap(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const HardwareConfig hw{n, n};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_fault_map(hw, 0.1, ++seed, "c"));
  state.SetItemsProcessed(state.iterations() * hw.total());
}
BENCHMARK(BM_GenerateFaultMap)->Arg(16)->Arg(64)->Arg(256);

static void BM_Fuse(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const HardwareConfig hw{n, n};
  const auto a = generate_fault_map(hw, 0.1, 1, "a");
  const auto b = generate_fault_map(hw, 0.1, 2, "b");
  for (auto _ : state) benchmark::DoNotOptimize(fuse(a, b));
}
BENCHMARK(BM_Fuse)->Arg(16)->Arg(256);

static void BM_DeriveNetworkMask(benchmark::State& state) {
  const HardwareConfig hw{16, 16};
  const auto map = generate_fault_map(hw, 0.1, 3, "m");
  const ModelSpec spec{16, {64, 64}, 8};
  const auto shapes = spec.layer_shapes();
  for (auto _ : state) benchmark::DoNotOptimize(derive_network_mask(shapes, hw, map));
}
BENCHMARK(BM_DeriveNetworkMask);

// One epoch over 800 training samples.
static void BM_TrainEpoch(benchmark::State& state) {
  const HardwareConfig hw{16, 16};
  DatasetSpec ds;
  ds.n_samples = 1000;
  const auto data = make_dataset(ds);
  const ModelSpec spec{ds.n_features, {32, 32}, ds.n_classes};
  const auto model = TinyModel::initialize(spec, 4);
  const auto mask = derive_network_mask(spec.layer_shapes(), hw,
                                        generate_fault_map(hw, 0.1, 5, "m"));
  TrainConfig tc;
  tc.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_fat(model, mask, data, tc));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

static void BM_GroupAndFuse(benchmark::State& state) {
  const HardwareConfig hw{16, 16};
  std::vector<FaultMap> maps;
  for (int i = 0; i < state.range(0); ++i)
    maps.push_back(generate_fault_map(hw, 0.05 + 0.001 * i, 100 + i, "c" + std::to_string(i)));
  const auto table = oracle::exponential_table();
  FusionOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(group_and_fuse(maps, table, opts));
}
BENCHMARK(BM_GroupAndFuse)->Arg(40)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
