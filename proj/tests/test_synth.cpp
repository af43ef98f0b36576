#include <doctest.h>

#include <filesystem>

#include "fixture_util.hpp"
#include "navvox/synth.hpp"
#include "oracles.hpp"

using namespace navvox;

namespace {

WorldSpec flat_spec(double extent) {
    WorldSpec s;
    s.extent_x = extent;
    s.extent_y = extent;
    return s;
}

WorldSpec mixed_spec(std::uint64_t seed) {
    WorldSpec s = clustered_world_spec(seed);
    s.extent_x = 18.0;
    s.extent_y = 18.0;
    s.terrain.mesas.push_back({3.0, 3.0, 2.0, 2.5});
    s.obstacles.excluded_props = 3;
    return s;
}

double polygon_area_xy(const NavMesh& m, std::uint32_t p) {
    const auto& idx = m.polygons()[p];
    double a = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& u = m.vertices()[idx[k]];
        const auto& v = m.vertices()[idx[(k + 1) % idx.size()]];
        a += u.x * v.y - v.x * u.y;
    }
    return a / 2.0;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("flat world without obstacles") {
    const World w = generate_world(flat_spec(8.0));
    CHECK(w.hf.width == 17);
    for (double h : w.hf.heights) CHECK(h == 0.0);
    for (const auto& m : w.meshes) CHECK(m.triangles.empty());
    CHECK(w.markers.empty());
}

TEST_CASE("staircase heights follow the closed-form step function") {
    WorldSpec s = flat_spec(6.0);
    s.hf_cell_size = 0.1;
    s.terrain.kind = TerrainKind::Staircase;
    s.terrain.riser = 0.3;
    s.terrain.tread = 1.0;
    const World w = generate_world(s);
    for (int j = 0; j < w.hf.depth; ++j)
        for (int i = 0; i < w.hf.width; ++i) CHECK(w.hf.at(i, j) == doctest::Approx(0.3 * (i / 10)));
}

TEST_CASE("noise gradient matches finite differences of the profile") {
    WorldSpec s = flat_spec(20.0);
    s.terrain.kind = TerrainKind::Noise;
    const World w = generate_world(s);
    REQUIRE(w.spec.terrain.waves.size() == 6);
    const auto& t = w.spec.terrain;
    for (double x = 0.3; x < 20.0; x += 1.7)
        for (double y = 0.1; y < 20.0; y += 2.3) {
            const double h = 1e-6;
            const auto g = t.gradient(x, y);
            CHECK(g[0] == doctest::Approx((t.height(x + h, y) - t.height(x - h, y)) / (2 * h)).epsilon(1e-6));
            CHECK(g[1] == doctest::Approx((t.height(x, y + h) - t.height(x, y - h)) / (2 * h)).epsilon(1e-6));
        }
}

TEST_CASE("world spec JSON round-trips and rejects unknown keys") {
    const WorldSpec s = mixed_spec(3);
    const auto j = to_json(s);
    CHECK(to_json(parse_world_spec(j)) == j);
    auto bad = j;
    bad["obstacle"] = 3;
    CHECK_THROWS_AS(parse_world_spec(bad), Error);
    auto bad_kind = j;
    bad_kind["terrain"]["profile"] = "cliffs";
    CHECK_THROWS_AS(parse_world_spec(bad_kind), Error);
}

TEST_CASE("same seed gives byte-identical artifacts") {
    const auto root = std::filesystem::temp_directory_path() / "navvox_synth_determinism";
    std::filesystem::remove_all(root);
    WorldSpec s = mixed_spec(17);
    s.random_defects.count = 2;
    write_fixture(build_fixture(s), root / "a");
    write_fixture(build_fixture(s), root / "b");
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(root / "a")) {
        CHECK(testutil::read_file(e.path()) == testutil::read_file(root / "b" / e.path().filename()));
        ++files;
    }
    CHECK(files >= 7);
    std::filesystem::remove_all(root);
}

TEST_CASE("single walkable voxel emits one square") {
    GridFrame f{{0, 0, 0}, 0.5};
    std::vector<Voxel> nodes{{{3, 4, 1}, f.center({3, 4, 1}), VoxelKind::TerrainSurface, 0.6}};
    const auto g = WalkGraph::from_adjacency(f, 0.75, nodes, {{}});
    const NavMesh m = emit_reference_navmesh(g);
    REQUIRE(m.polygon_count() == 1);
    CHECK(m.polygons()[0].size() == 4);
    CHECK(polygon_area_xy(m, 0) == doctest::Approx(0.25));
    for (const auto& v : m.vertices()) CHECK(v.z == 0.6);
}

TEST_CASE("flat 10x10 patch merges and conserves area") {
    WorldSpec s = flat_spec(5.0);
    const Fixture fx = build_fixture(s);
    REQUIRE(fx.recon.graph.size() == 100);
    const NavMesh m = emit_reference_navmesh(fx.recon.graph);
    CHECK(m.polygon_count() == 1);
    double area = 0.0;
    for (std::uint32_t p = 0; p < m.polygon_count(); ++p) area += polygon_area_xy(m, p);
    CHECK(area == doctest::Approx(100 * 0.25));
}

TEST_CASE("emitted navmesh components reproduce walk-graph components") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Fixture fx = build_fixture(mixed_spec(seed));
        const auto& g = fx.recon.graph;
        const NavMesh m = emit_reference_navmesh(g);
        const auto cfg = NavQueryConfig::defaults(0.5, 0.4);
        std::vector<std::uint32_t> poly(g.size());
        for (std::uint32_t n = 0; n < g.size(); ++n) {
            const auto p = project_point(m, g.voxel(n).center, cfg);
            REQUIRE(p.has_value());
            poly[n] = *p;
        }
        oracle::UnionFind uf(g.size());
        for (std::uint32_t i = 0; i < g.size(); ++i)
            for (auto j : g.neighbors(i)) uf.unite(i, j);
        for (std::uint32_t i = 0; i < g.size(); i += 3)
            for (std::uint32_t j = i + 1; j < g.size(); j += 5)
                CHECK((uf.find(i) == uf.find(j)) == (m.component(poly[i]) == m.component(poly[j])));
        std::istringstream in(format_navmesh(m));
        CHECK(format_navmesh(parse_navmesh(in)) == format_navmesh(m));
    }
}

TEST_CASE("defect-free fixture validates clean at eps = s/4, tau = 1") {
    const Fixture fx = build_fixture(mixed_spec(8));
    REQUIRE(fx.injection.ground_truth.empty());
    testutil::Validation v(fx, fx.injection.mesh);
    ValidationConfig cfg;
    cfg.epsilon = 0.125;
    cfg.tau = 1;
    const auto rep = run_validation(v.inputs, cfg);
    CHECK(rep.raw.empty());
    CHECK(rep.filtered.empty());
    CHECK(rep.metrics.island_checks == fx.recon.graph.size() - fx.recon.reach.size());
}

TEST_CASE("empty injection list leaves the mesh unchanged") {
    const Fixture fx = build_fixture(mixed_spec(4));
    const auto base = layout_from_graph(fx.recon.graph);
    const auto r = inject_defects(base, {}, fx.recon, fx.world.spec);
    CHECK(r.ground_truth.empty());
    CHECK(format_navmesh(r.mesh) == format_navmesh(emit_reference_navmesh(fx.recon.graph)));
}

TEST_CASE("removing a 3x3 patch marks exactly the covered voxels") {
    WorldSpec s = flat_spec(10.0);
    s.defects.push_back({DefectKind::RemovePolygons, {7.0, 7.0}, {8.5, 8.5}, 0.0});
    const Fixture fx = build_fixture(s);
    REQUIRE(fx.injection.ground_truth.size() == 9);
    for (auto n : fx.injection.ground_truth) {
        const auto& c = fx.recon.graph.voxel(n).center;
        CHECK(c.x > 7.0);
        CHECK(c.x < 8.5);
        CHECK(c.y > 7.0);
        CHECK(c.y < 8.5);
        CHECK(fx.recon.reach.contains(n));
    }
}

TEST_CASE("shrink by s/2 marks the boundary band, confirmed by brute-force checking") {
    WorldSpec s = flat_spec(10.0);
    s.obstacles.boxes.push_back({{2.0, 2.0, -1.0}, {3.0, 4.0, 3.0}, false});
    s.defects.push_back({DefectKind::ShrinkMesh, {0, 0}, {0, 0}, 0.25});
    const Fixture fx = build_fixture(s);
    const auto& g = fx.recon.graph;
    // Band: every walkable voxel with an orthogonal neighbour column that is not walkable.
    std::vector<std::uint32_t> band;
    for (std::uint32_t n = 0; n < g.size(); ++n) {
        const auto& i = g.voxel(n).index;
        for (auto [dx, dy] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}})
            if (!g.node_at_column(i.x + dx, i.y + dy)) {
                band.push_back(n);
                break;
            }
    }
    CHECK(fx.injection.ground_truth == band);
    const auto cfg = NavQueryConfig::defaults(0.5, 0.4);
    CHECK(oracle::mismatches(g, fx.recon.reach, fx.injection.mesh, cfg, testutil::nav_seed(fx)) == band);
}

TEST_CASE("phantom polygons over a mesa expose the unreachable plateau") {
    WorldSpec s = flat_spec(16.0);
    s.seed_xy = std::array<double, 2>{2.0, 2.0};
    s.terrain.mesas.push_back({10.0, 10.0, 2.5, 3.0});
    s.defects.push_back({DefectKind::PhantomPolygons, {7.0, 7.0}, {13.5, 13.5}, 0.0});
    const Fixture fx = build_fixture(s);
    REQUIRE(fx.recon.graph.size() > fx.recon.reach.size());
    const auto& gt = fx.injection.ground_truth;
    REQUIRE(!gt.empty());
    for (auto n : gt) {
        CHECK_FALSE(fx.recon.reach.contains(n));
        CHECK(fx.recon.graph.voxel(n).surface > 2.0);
    }
    CHECK(gt.size() == fx.recon.graph.size() - fx.recon.reach.size());
}

TEST_CASE("ground truth agrees with brute-force mismatches for every defect kind") {
    WorldSpec s = mixed_spec(5);
    s.terrain.mesas.clear();
    s.terrain.mesas.push_back({14.0, 14.0, 2.0, 3.0});
    s.seed_xy = std::array<double, 2>{4.0, 9.0};
    s.defects.push_back({DefectKind::PhantomPolygons, {11.0, 11.0}, {17.0, 17.0}, 0.0});
    s.defects.push_back({DefectKind::ShrinkMesh, {0, 0}, {0, 0}, 0.1});
    s.random_defects.count = 2;
    s.random_defects.min_cells = 3;
    s.random_defects.max_cells = 4;
    s.random_defects.seed_clearance = 3.0;
    s.random_defects.gap_cells = 1;
    const Fixture fx = build_fixture(s);
    const auto cfg = NavQueryConfig::defaults(0.5, 0.4);
    const auto expect = oracle::mismatches(fx.recon.graph, fx.recon.reach, fx.injection.mesh, cfg, testutil::nav_seed(fx));
    CHECK(fx.injection.ground_truth == expect);
    CHECK(!expect.empty());
}

TEST_CASE("injections next to the seed or outside the world are rejected") {
    WorldSpec s = flat_spec(10.0);
    const Fixture fx = build_fixture(s);
    const auto base = layout_from_graph(fx.recon.graph);
    const std::vector<DefectInjection> near{{DefectKind::DisconnectIsland, {5.2, 5.2}, {7.0, 7.0}, 0.0}};
    CHECK_THROWS_AS(inject_defects(base, near, fx.recon, fx.world.spec), Error);
    const std::vector<DefectInjection> outside{{DefectKind::RemovePolygons, {8.0, 8.0}, {12.0, 9.0}, 0.0}};
    CHECK_THROWS_AS(inject_defects(base, outside, fx.recon, fx.world.spec), Error);
    const std::vector<DefectInjection> shrink_all{{DefectKind::ShrinkMesh, {0, 0}, {0, 0}, 20.0}};
    CHECK_THROWS_AS(inject_defects(base, shrink_all, fx.recon, fx.world.spec), Error);
}

TEST_CASE("bench fixture adds defects without changing the world") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const Fixture plain = build_fixture(clustered_world_spec(seed));
        const Fixture bench = build_fixture(bench_world_spec(seed));
        CHECK(bench.defects.size() == 3);
        CHECK(!bench.injection.ground_truth.empty());
        CHECK(plain.injection.ground_truth.empty());
        CHECK(bench.recon.reach.members == plain.recon.reach.members);
        REQUIRE(bench.world.markers.size() == plain.world.markers.size());
        for (std::size_t k = 0; k < plain.world.markers.size(); ++k)
            CHECK(bench.world.markers[k].position == plain.world.markers[k].position);
    }
}

}  // TEST_SUITE
