#include <benchmark/benchmark.h>

#include <numeric>

#include "navvox/pipeline.hpp"
#include "navvox/synth.hpp"
#include "navvox/validate.hpp"

using namespace navvox;

namespace {

// One moderately cluttered fixture shared by every kernel.
const Fixture& fixture() {
    static const Fixture fx = [] {
        WorldSpec s = clustered_world_spec(11);
        s.extent_x = 48.0;
        s.extent_y = 48.0;
        s.obstacles.count = 30;
        s.obstacles.excluded_props = 10;
        s.markers.clusters = 6;
        s.random_defects.count = 4;
        return build_fixture(s);
    }();
    return fx;
}

const VoxelGrid& grid() {
    static const VoxelGrid g = [] {
        const auto& fx = fixture();
        const double s = fx.world.spec.resolution;
        return build_grid(voxelize_terrain(fx.world.hf, fx.world.region, s),
                          voxelize_collision(fx.world.meshes, fx.world.region, s));
    }();
    return g;
}

void BM_VoxelizeCollision(benchmark::State& st) {
    const auto& fx = fixture();
    const bool serial = st.range(0) == 0;
    for (auto _ : st) {
        auto v = serial ? voxelize_collision_serial(fx.world.meshes, fx.world.region, fx.world.spec.resolution)
                        : voxelize_collision(fx.world.meshes, fx.world.region, fx.world.spec.resolution);
        benchmark::DoNotOptimize(v);
    }
}

void BM_ClassifyWalkable(benchmark::State& st) {
    const auto& fx = fixture();
    const auto& g = grid();
    const bool serial = st.range(0) == 0;
    for (auto _ : st) {
        auto w = serial ? classify_walkable_serial(g, fx.world.hf, fx.world.spec.agent)
                        : classify_walkable(g, fx.world.hf, fx.world.spec.agent);
        benchmark::DoNotOptimize(w);
    }
}

void BM_ComputeImportance(benchmark::State& st) {
    const auto& fx = fixture();
    const bool serial = st.range(0) == 0;
    for (auto _ : st) {
        auto f = serial ? compute_importance_serial(fx.recon.graph, fx.world.markers)
                        : compute_importance(fx.recon.graph, fx.world.markers);
        benchmark::DoNotOptimize(f);
    }
}

void BM_CheckWaypoints(benchmark::State& st) {
    const auto& fx = fixture();
    const auto& g = fx.recon.graph;
    const NavReachability nav(fx.injection.mesh, g.voxel(fx.recon.reach.seed).center,
                              NavQueryConfig::defaults(fx.world.spec.resolution, fx.world.spec.agent.step_height));
    const WaypointChecker checker(g, fx.recon.reach, nav);
    std::vector<std::uint32_t> nodes(g.size());
    std::iota(nodes.begin(), nodes.end(), 0u);
    const bool serial = st.range(0) == 0;
    for (auto _ : st) {
        auto r = serial ? check_waypoints_serial(checker, nodes) : check_waypoints(checker, nodes);
        benchmark::DoNotOptimize(r);
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * nodes.size()));
}

}  // namespace

// Argument 0 = serial reference, 1 = OpenMP.
BENCHMARK(BM_VoxelizeCollision)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyWalkable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComputeImportance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CheckWaypoints)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
