#include <benchmark/benchmark.h>

#include "quiltspread/datagen.hpp"
#include "quiltspread/net.hpp"
#include "quiltspread/planner.hpp"
#include "quiltspread/sim.hpp"

namespace {

void BM_SimStep(benchmark::State& state) {
    qs::SimParams params;
    qs::FabricState st = qs::spread_state();
    st.pos(32, 32).z = 2.0;
    for (auto _ : state) {
        qs::step(st, params);
        benchmark::DoNotOptimize(st.positions.data());
    }
}
BENCHMARK(BM_SimStep);

void BM_ExecuteAction(benchmark::State& state) {
    qs::SimParams params;
    qs::FabricState st = qs::spread_state();
    for (auto _ : state) {
        qs::FabricState out = qs::execute_action(st, {0, 0, 32, 32}, params);
        benchmark::DoNotOptimize(out.positions.data());
    }
}
BENCHMARK(BM_ExecuteAction)->Unit(benchmark::kMillisecond);

void BM_DepthVoxelRoundTrip(benchmark::State& state) {
    qs::DepthGrid d;
    for (int i = 0; i < qs::kGridCells; ++i) d.cells[i] = static_cast<std::uint8_t>(i % 32);
    for (auto _ : state) {
        qs::DepthGrid back = qs::from_voxel_grid(qs::to_voxel_grid(d));
        benchmark::DoNotOptimize(back.cells.data());
    }
}
BENCHMARK(BM_DepthVoxelRoundTrip);

void BM_NetForward(benchmark::State& state) {
    qs::NetConfig cfg;
    qs::EmdNet net(cfg, 1);
    qs::DepthGrid d;
    for (auto _ : state) {
        auto out = net.predict(d, {{0, 0, 32, 32}});
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_NetForward)->Unit(benchmark::kMillisecond);

void BM_Contour(benchmark::State& state) {
    qs::SimParams params;
    qs::FabricState st = qs::execute_action(qs::spread_state(), {0, 0, 40, 40}, params);
    qs::DepthGrid d = qs::to_depth_grid(st, params);
    for (auto _ : state) {
        qs::ContourRegion r = qs::contour(d, 1);
        benchmark::DoNotOptimize(r.inside.data());
    }
}
BENCHMARK(BM_Contour);

} // namespace

BENCHMARK_MAIN();
