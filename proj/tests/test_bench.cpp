#include <doctest.h>

#include <cmath>
#include <sstream>

#include "navvox/bench.hpp"

using namespace navvox;

namespace {

// 5 x 4 flat voxels, seed in the (0, 0) corner, the two far-corner cells of
// column x = 4 removed from the navmesh.
WorldSpec micro_spec() {
    WorldSpec s;
    s.extent_x = 2.5;
    s.extent_y = 2.0;
    s.seed_xy = std::array<double, 2>{0.25, 0.25};
    s.defects.push_back({DefectKind::RemovePolygons, {2.0, 1.0}, {2.5, 2.0}, 0.0});
    return s;
}

const BenchRow& row(const BenchResult& r, const std::string& strategy, double pct) {
    for (const auto& x : r.rows)
        if (x.strategy == strategy && x.budget_pct == pct) return x;
    throw Error("row not found");
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("quartiles interpolate and keep infinities last") {
    const auto q = quartiles({4.0, 1.0, 3.0, 2.0});
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    CHECK(quartiles({7.0}).median == 7.0);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(std::isinf(quartiles({1.0, inf}).median));
    CHECK(quartiles({1.0, 2.0, inf}).median == 2.0);
    CHECK(std::isnan(quartiles({}).median));
}

TEST_CASE("metrics on the 20-voxel micro fixture match hand values") {
    BenchConfig cfg;
    cfg.fixture = micro_spec();
    cfg.seeds = {1};
    cfg.epsilon = 0.0;
    cfg.tau = 1;
    cfg.budget_pcts = {50.0, 100.0};
    cfg.timings = false;
    cfg.strategies = {{"bfs", Strategy::BFS}};
    const auto r = run_benchmark(cfg);
    REQUIRE(r.rows.size() == 2);

    // BFS layers from the corner under 8-connectivity hold 1, 3, 5, 7 and 4
    // voxels; the removed cells sit in the last layer.
    const auto& half = row(r, "bfs", 50.0).metrics;
    CHECK(half.detection_rate == 0.0);
    CHECK(half.detection_rate_injected == 0.0);
    CHECK(half.coverage == doctest::Approx(50.0));  // no markers: coverage counts voxels
    CHECK(half.samples_pct == doctest::Approx(50.0));
    CHECK(half.false_positive_rate == 0.0);
    REQUIRE(half.samples_to_target.has_value());
    CHECK(*half.samples_to_target == 17);  // 0.85 * 20
    CHECK(half.recon_ms == 0.0);
    CHECK(half.validate_ms == 0.0);

    const auto& full = row(r, "bfs", 100.0).metrics;
    CHECK(full.detection_rate == 100.0);
    CHECK(full.detection_rate_injected == 100.0);
    CHECK(full.coverage == doctest::Approx(100.0));
    CHECK(full.samples_pct == doctest::Approx(100.0));
    CHECK(full.false_positive_rate == 0.0);

    std::ostringstream csv;
    write_bench_csv(csv, r);
    CHECK(csv.str() ==
          "strategy,seed,budget_pct,detection_rate,coverage,samples_to_85,false_positive_rate,recon_ms,validate_ms\n"
          "bfs,1,50.0,0.000,50.000,17,0.000,0.000,0.000\n"
          "bfs,1,100.0,100.000,100.000,17,0.000,0.000,0.000\n");
}

TEST_CASE("false positives count detections outside the injected set") {
    // Validating against a navmesh missing one extra cell that the ground
    // truth does not know about is modelled by shrinking tau and epsilon to 0
    // on a fixture whose injected set is exact: no false positives expected.
    BenchConfig cfg;
    WorldSpec s = clustered_world_spec(3);
    s.extent_x = 16.0;
    s.extent_y = 16.0;
    s.seed_xy = std::array<double, 2>{2.0, 2.0};
    s.defects.push_back({DefectKind::RemovePolygons, {10.0, 10.0}, {12.0, 12.0}, 0.0});
    cfg.fixture = s;
    cfg.seeds = {1, 2};
    cfg.timings = false;
    cfg.strategies = {{"bfs", Strategy::BFS}, {"dfs", Strategy::DFS}, {"heuristic", Strategy::Heuristic}};
    const auto r = run_benchmark(cfg);
    for (const auto& x : r.rows) {
        REQUIRE(x.ok());
        CHECK(x.metrics.false_positive_rate == 0.0);
        CHECK((x.metrics.coverage >= 0.0 && x.metrics.coverage <= 100.0));
        CHECK((x.metrics.detection_rate >= 0.0 && x.metrics.detection_rate <= 100.0));
        CHECK(x.metrics.samples_pct <= 100.0);
        if (x.budget_pct == 100.0) {
            CHECK(x.metrics.detection_rate == 100.0);
            CHECK(x.metrics.detection_rate_injected == 100.0);
        }
    }
    CHECK(r.summaries.size() == 3 * 4);
    CHECK(r.curves.size() == 3);
    for (const auto& c : r.curves)
        for (std::size_t k = 1; k < c.median_coverage.size(); ++k) CHECK(c.median_coverage[k] >= c.median_coverage[k - 1]);
}

TEST_CASE("a failing run is recorded without stopping the batch") {
    std::mt19937_64 rng(1);
    const QNetwork wrong = QNetwork::random({4, 8}, rng);  // input size does not match the state
    BenchConfig cfg;
    cfg.fixture = micro_spec();
    cfg.seeds = {1, 2};
    cfg.timings = false;
    cfg.strategies = {{"broken", Strategy::RL, &wrong}, {"bfs", Strategy::BFS}};
    const auto r = run_benchmark(cfg);
    std::size_t failed = 0, ok = 0;
    for (const auto& x : r.rows) (x.ok() ? ok : failed) += 1;
    CHECK(failed == 2 * 4);
    CHECK(ok == 2 * 4);
    CHECK(median_samples_to_target(r, "bfs").has_value());
    CHECK_FALSE(median_samples_to_target(r, "broken").has_value());
    std::ostringstream table;
    write_bench_table(table, r);
    CHECK(table.str().find("run failed: broken") != std::string::npos);
}

TEST_CASE("benchmark output is reproducible without timings") {
    BenchConfig cfg;
    cfg.fixture = clustered_world_spec(0);
    cfg.fixture.extent_x = 14.0;
    cfg.fixture.extent_y = 14.0;
    cfg.fixture.markers.clusters = 2;
    cfg.seeds = {4, 5};
    cfg.timings = false;
    cfg.strategies = {{"random", Strategy::Random}, {"random-teleport", Strategy::RandomTeleport}};
    std::ostringstream a, b;
    write_bench_csv(a, run_benchmark(cfg));
    write_bench_csv(b, run_benchmark(cfg));
    CHECK(a.str() == b.str());
    CHECK(bench_plot_json(run_benchmark(cfg)).dump() == bench_plot_json(run_benchmark(cfg)).dump());
}

TEST_CASE("invalid benchmark configurations are rejected") {
    BenchConfig cfg;
    cfg.strategies = {{"bfs", Strategy::BFS}};
    CHECK_THROWS_AS(cfg.validate(), Error);  // no seeds
    cfg.seeds = {1};
    CHECK_NOTHROW(cfg.validate());
    cfg.coverage_target = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.coverage_target = 0.85;
    cfg.budget_pcts = {120.0};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.budget_pcts = {50.0};
    cfg.strategies.push_back({"rl", Strategy::RL, nullptr});
    CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
