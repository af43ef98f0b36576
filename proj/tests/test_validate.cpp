#include <doctest.h>

#include "fixture_util.hpp"
#include "navvox/validate.hpp"
#include "oracles.hpp"

using namespace navvox;

namespace {

WorldSpec defect_spec(std::uint64_t seed) {
    WorldSpec s = clustered_world_spec(seed);
    s.extent_x = 20.0;
    s.extent_y = 20.0;
    s.seed_xy = std::array<double, 2>{3.0, 3.0};
    s.defects.push_back({DefectKind::RemovePolygons, {12.0, 12.0}, {14.0, 14.0}, 0.0});
    s.defects.push_back({DefectKind::DisconnectIsland, {4.0, 14.0}, {6.5, 16.5}, 0.0});
    return s;
}

Inconsistency item(double x, double y, double d = 1.0) {
    Inconsistency i;
    i.position = {x, y, 0.0};
    i.boundary_distance = d;
    return i;
}

}  // namespace

TEST_SUITE("validate") {

TEST_CASE("parallel waypoint check equals the serial check and the brute-force oracle") {
    const Fixture fx = build_fixture(defect_spec(3));
    const auto& g = fx.recon.graph;
    const auto cfg = NavQueryConfig::defaults(0.5, 0.4);
    NavReachability nav(fx.injection.mesh, testutil::nav_seed(fx), cfg);
    WaypointChecker checker(g, fx.recon.reach, nav);
    std::vector<std::uint32_t> all(g.size());
    std::iota(all.begin(), all.end(), 0u);
    const auto par = check_waypoints(checker, all);
    const auto ser = check_waypoints_serial(checker, all);
    REQUIRE(par.size() == ser.size());
    std::vector<std::uint32_t> nodes;
    for (std::size_t k = 0; k < par.size(); ++k) {
        CHECK(par[k].node == ser[k].node);
        CHECK(par[k].kind == ser[k].kind);
        CHECK(par[k].boundary_distance == ser[k].boundary_distance);
        nodes.push_back(par[k].node);
        const bool in_reach = fx.recon.reach.contains(par[k].node);
        CHECK((par[k].kind == InconsistencyKind::MissingNavmesh) == in_reach);
        CHECK(par[k].boundary_distance >= 0.0);
    }
    CHECK(nodes == oracle::mismatches(g, fx.recon.reach, fx.injection.mesh, cfg, testutil::nav_seed(fx)));
    CHECK(nodes == fx.injection.ground_truth);
}

TEST_CASE("tolerance filter drops items within epsilon") {
    const std::vector<Inconsistency> raw{item(0, 0, 0.1), item(1, 0, 0.5), item(2, 0, 0.51), item(3, 0, 2.0)};
    CHECK(tolerance_filter(raw, 0.0).size() == 4);
    const auto f = tolerance_filter(raw, 0.5);
    REQUIRE(f.size() == 2);
    CHECK(f[0].position.x == 2.0);
    CHECK(f[1].position.x == 3.0);
}

TEST_CASE("clusters match the all-pairs oracle on random point sets") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 12.0);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<Inconsistency> items;
        const std::size_t n = 5 + rng() % 80;
        for (std::size_t k = 0; k < n; ++k) items.push_back(item(u(rng), u(rng)));
        const std::size_t tau = 1 + rng() % 4;
        const double radius = 0.5 + 0.25 * static_cast<double>(rng() % 5);
        const auto got = cluster_defects(items, tau, radius);
        std::set<std::vector<std::size_t>> members;
        for (std::size_t k = 0; k < got.size(); ++k) {
            members.insert(got[k].members);
            CHECK(got[k].id == k);
            CHECK(got[k].size() >= tau);
            CHECK(std::is_sorted(got[k].members.begin(), got[k].members.end()));
            if (k > 0) CHECK(got[k - 1].size() >= got[k].size());
            Vec3 c{};
            for (auto m : got[k].members) c = c + items[m].position;
            c = c * (1.0 / static_cast<double>(got[k].size()));
            CHECK(distance(c, got[k].centroid) < 1e-9);
        }
        CHECK(members == oracle::clusters(items, tau, radius));
    }
}

TEST_CASE("every strategy finds the same defects when run to exhaustion") {
    const Fixture fx = build_fixture(defect_spec(6));
    std::mt19937_64 rng(2);
    const QNetwork net = QNetwork::random(default_architecture(), rng);
    testutil::Validation v(fx, fx.injection.mesh, &net);
    std::optional<DefectReport> first;
    for (Strategy kind : {Strategy::BFS, Strategy::DFS, Strategy::Random, Strategy::RandomTeleport, Strategy::Heuristic,
                          Strategy::RL}) {
        ValidationConfig cfg;
        cfg.strategy = kind;
        cfg.seed = 5;
        const auto rep = run_validation(v.inputs, cfg);
        CHECK(rep.metrics.unique_waypoints == fx.recon.reach.size());
        CHECK(rep.metrics.coverage == doctest::Approx(1.0));
        if (!first) {
            first = rep;
            continue;
        }
        REQUIRE(rep.raw.size() == first->raw.size());
        for (std::size_t k = 0; k < rep.raw.size(); ++k) CHECK(rep.raw[k].node == first->raw[k].node);
        CHECK(rep.clusters.size() == first->clusters.size());
    }
    REQUIRE(first);
    std::vector<std::uint32_t> nodes;
    for (const auto& r : first->raw) nodes.push_back(r.node);
    std::sort(nodes.begin(), nodes.end());
    CHECK(nodes == fx.injection.ground_truth);
    CHECK(first->clusters.size() == 2);
}

TEST_CASE("metrics on a hand-sized micro fixture") {
    // 5 x 4 flat voxels; the emitted mesh drops two corner cells.
    WorldSpec s;
    s.extent_x = 2.5;
    s.extent_y = 2.0;
    s.seed_xy = std::array<double, 2>{0.25, 0.25};
    s.defects.push_back({DefectKind::RemovePolygons, {2.0, 1.0}, {2.5, 2.0}, 0.0});
    const Fixture fx = build_fixture(s);
    REQUIRE(fx.recon.graph.size() == 20);
    REQUIRE(fx.injection.ground_truth.size() == 2);
    testutil::Validation v(fx, fx.injection.mesh);
    ValidationConfig cfg;
    cfg.epsilon = 0.0;
    cfg.tau = 1;
    const auto rep = run_validation(v.inputs, cfg);
    const auto& m = rep.metrics;
    CHECK(m.walkable == 20);
    CHECK(m.reachable == 20);
    CHECK(m.unique_waypoints == 20);
    CHECK(m.island_checks == 0);
    CHECK(m.missing_raw == 2);
    CHECK(m.phantom_raw == 0);
    CHECK(m.missing_filtered == 2);
    REQUIRE(rep.clusters.size() == 1);
    CHECK(rep.clusters[0].size() == 2);
    CHECK(rep.clusters[0].centroid.x == doctest::Approx(2.25));
    CHECK(rep.clusters[0].centroid.y == doctest::Approx(1.5));
    // Both removed cells border surviving polygons, half a cell from their centers.
    for (const auto& d : rep.raw) CHECK(d.boundary_distance == doctest::Approx(0.25));

    cfg.epsilon = 0.2;
    CHECK(run_validation(v.inputs, cfg).filtered.size() == 2);
    cfg.epsilon = 0.25;
    CHECK(run_validation(v.inputs, cfg).filtered.empty());
    cfg.epsilon = 0.0;
    cfg.tau = 3;
    CHECK(run_validation(v.inputs, cfg).clusters.empty());
}

TEST_CASE("report json carries the stable fields") {
    const Fixture fx = build_fixture(defect_spec(3));
    testutil::Validation v(fx, fx.injection.mesh);
    ValidationConfig cfg;
    const auto rep = run_validation(v.inputs, cfg);
    const auto j = report_json(rep, v.inputs, cfg, nlohmann::json{{"origin", "test"}});
    CHECK(j.at("schema") == "navvox-report/1");
    CHECK(j.at("config").at("origin") == "test");
    CHECK(j.at("validation").at("budget") == "exhaustive");
    CHECK(j.at("metrics").at("clusters") == rep.clusters.size());
    CHECK(j.at("defects").size() == rep.filtered.size());
    for (const auto& d : j.at("defects")) {
        CHECK(d.at("position").size() == 3);
        CHECK(d.contains("cluster_id"));
        CHECK((d.at("kind") == "missing_navmesh" || d.at("kind") == "phantom_navmesh"));
    }
    std::size_t members = 0;
    for (const auto& c : j.at("clusters")) members += c.at("size").get<std::size_t>();
    std::size_t assigned = 0;
    for (auto c : rep.cluster_of) assigned += c >= 0;
    CHECK(members == assigned);
    CHECK(j.dump() == report_json(run_validation(v.inputs, cfg), v.inputs, cfg, nlohmann::json{{"origin", "test"}}).dump());
}

TEST_CASE("invalid validation settings are rejected") {
    ValidationConfig cfg;
    cfg.epsilon = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.tau = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.episodes = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
