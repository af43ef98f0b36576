#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "navvox/geom.hpp"
#include "navvox/walk.hpp"
#include "oracles.hpp"

using namespace navvox;

namespace {

HeightField wavy_field(std::mt19937_64& rng, int n, double c) {
    std::uniform_real_distribution<double> ph(0.0, 6.28);
    const double p1 = ph(rng), p2 = ph(rng);
    HeightField hf;
    hf.cell_size = c;
    hf.width = n;
    hf.depth = n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            hf.heights.push_back(0.9 * std::sin(0.7 * i * c + p1) + 0.6 * std::cos(0.9 * j * c + p2));
    return hf;
}

CollisionMesh random_boxes(std::mt19937_64& rng, int count, double extent) {
    std::uniform_real_distribution<double> pos(0.0, extent - 1.0), size(0.3, 1.5), z0(-1.0, 2.5);
    CollisionMesh m;
    for (int b = 0; b < count; ++b) {
        const Vec3 lo{pos(rng), pos(rng), z0(rng)};
        const Vec3 hi = lo + Vec3{size(rng), size(rng), size(rng)};
        const auto base = static_cast<std::uint32_t>(m.vertices.size());
        for (int k = 0; k < 8; ++k) m.vertices.push_back({(k & 1) ? hi.x : lo.x, (k & 2) ? hi.y : lo.y, (k & 4) ? hi.z : lo.z});
        for (auto t : std::initializer_list<std::array<std::uint32_t, 3>>{
                 {0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}})
            m.triangles.push_back({base + t[0], base + t[1], base + t[2]});
    }
    return m;
}

struct Scene {
    HeightField hf;
    VoxelGrid grid;
};

Scene random_scene(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Scene s;
    s.hf = wavy_field(rng, 25, 0.5);
    const std::vector<CollisionMesh> meshes{random_boxes(rng, 6, 12.0)};
    const Region region{{0.0, 0.0, -3.0}, {12.0, 12.0, 6.0}};
    s.grid = build_grid(voxelize_terrain(s.hf, region, 0.5), voxelize_collision(meshes, region, 0.5));
    return s;
}

// Walkability evaluated from the full occupied list rather than per-column lookups.
bool walkable_oracle(const Scene& sc, const AgentParams& p, const Voxel& v) {
    const auto& hf = sc.hf;
    const double c = hf.cell_size;
    const double x0 = std::max(v.center.x - c, hf.origin.x), x1 = std::min(v.center.x + c, hf.max_x());
    const double y0 = std::max(v.center.y - c, hf.origin.y), y1 = std::min(v.center.y + c, hf.max_y());
    const double gx = (hf.sample(x1, v.center.y) - hf.sample(x0, v.center.y)) / (x1 - x0);
    const double gy = (hf.sample(v.center.x, y1) - hf.sample(v.center.x, y0)) / (y1 - y0);
    const double slope = std::atan(std::hypot(gx, gy));
    if (slope > p.max_slope + 1e-12) return false;

    const double s = sc.grid.resolution();
    const double oz = sc.grid.frame().origin.z;
    for (const auto& o : sc.grid.occupied()) {
        if (o.index.x == v.index.x && o.index.y == v.index.y && o.index.z > v.index.z &&
            (o.index.z - v.index.z - 1) * s < p.height)
            return false;
        const double lo = oz + o.index.z * s;
        const double overlap = lo < v.surface + p.height && lo + s > v.surface + p.step_height;
        if (overlap && distance_xy(o.center, v.center) < p.radius) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("walk") {

TEST_CASE("surface normal of a ramp is the analytic normal") {
    HeightField hf;
    hf.cell_size = 0.5;
    hf.width = 10;
    hf.depth = 10;
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 10; ++i) hf.heights.push_back(0.3 * i * 0.5 - 0.2 * j * 0.5);
    const Vec3 n = surface_normal(hf, 2.0, 2.0);
    const double len = std::sqrt(0.09 + 0.04 + 1.0);
    CHECK(n.x == doctest::Approx(-0.3 / len));
    CHECK(n.y == doctest::Approx(0.2 / len));
    CHECK(n.z == doctest::Approx(1.0 / len));
    CHECK_THROWS_AS(surface_normal(hf, 0.2, 2.0), Error);
    CHECK(terrain_slope(hf, 0.2, 2.0) == doctest::Approx(std::atan(std::sqrt(0.13))));
}

TEST_CASE("45 degree slope sits on the classifier boundary") {
    HeightField hf;
    hf.cell_size = 0.5;
    hf.width = 8;
    hf.depth = 8;
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) hf.heights.push_back(i * 0.5);
    CHECK(terrain_slope(hf, 1.25, 1.25) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
}

TEST_CASE("parallel and serial classification match the brute-force predicate") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const Scene sc = random_scene(seed);
        AgentParams p;
        p.radius = seed % 2 ? 0.5 : 0.8;
        p.max_slope = seed % 3 ? std::numbers::pi / 4 : 0.4;
        const auto par = classify_walkable(sc.grid, sc.hf, p);
        CHECK(par == classify_walkable_serial(sc.grid, sc.hf, p));
        std::vector<VoxelIndex> expect;
        for (const auto& v : sc.grid.terrain())
            if (walkable_oracle(sc, p, v)) expect.push_back(v.index);
        CHECK(par == expect);
        CHECK(!par.empty());
    }
}

TEST_CASE("walk graph edges match the pairwise rule") {
    const Scene sc = random_scene(42);
    AgentParams p;
    const auto walk = classify_walkable(sc.grid, sc.hf, p);
    const WalkGraph g = build_walk_graph(walk, sc.grid, p, default_neighbor_radius(0.5));
    auto step_ok = [&](std::uint32_t a, std::uint32_t b) {
        return std::abs(g.voxel(a).surface - g.voxel(b).surface) <= p.step_height;
    };
    auto node_at = [&](std::int32_t x, std::int32_t y) -> std::optional<std::uint32_t> {
        for (std::uint32_t i = 0; i < g.size(); ++i)
            if (g.voxel(i).index.x == x && g.voxel(i).index.y == y) return i;
        return std::nullopt;
    };
    std::size_t edges = 0;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        std::vector<std::uint32_t> expect;
        for (std::uint32_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            const auto& a = g.voxel(i).index;
            const auto& b = g.voxel(j).index;
            if (distance_xy(g.voxel(i).center, g.voxel(j).center) > 0.75 + 1e-9 || !step_ok(i, j)) continue;
            if (a.x != b.x && a.y != b.y) {
                const auto m1 = node_at(b.x, a.y), m2 = node_at(a.x, b.y);
                const bool bridged = (m1 && step_ok(i, *m1) && step_ok(*m1, j)) || (m2 && step_ok(i, *m2) && step_ok(*m2, j));
                if (!bridged) continue;
            }
            expect.push_back(j);
        }
        const auto got = g.neighbors(i);
        CHECK(std::vector<std::uint32_t>(got.begin(), got.end()) == expect);
        edges += expect.size();
    }
    CHECK(edges / 2 == g.edge_count());
}

TEST_CASE("step height separates or joins two cells") {
    for (double dh : {0.39, 0.41}) {
        HeightField hf;
        hf.cell_size = 0.25;
        hf.width = 9;
        hf.depth = 5;
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 9; ++i) hf.heights.push_back(i >= 4 ? dh : 0.0);
        AgentParams p;
        p.max_slope = 1.5;  // isolate the step test
        const Region region{{0.0, 0.0, -1.0}, {2.0, 1.0, 3.0}};
        const auto grid = build_grid(voxelize_terrain(hf, region, 0.5), VoxelSet{GridFrame::for_region(region, 0.5), {}});
        const auto walk = classify_walkable(grid, hf, p);
        const auto g = build_walk_graph(walk, grid, p, 0.75);
        const auto reach = flood_fill_from(g, 0);
        CHECK((reach.size() == g.size()) == (dh <= 0.4));
    }
}

TEST_CASE("flood fill equals the union-find component on random graphs") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 50 + rng() % 400;
        std::vector<Voxel> nodes;
        for (std::size_t i = 0; i < n; ++i) {
            const VoxelIndex idx{static_cast<std::int32_t>(i), 0, 0};
            nodes.push_back({idx, {i + 0.5, 0.5, 0.5}, VoxelKind::TerrainSurface, 0.0});
        }
        std::vector<std::vector<std::uint32_t>> adj(n);
        for (std::size_t e = 0; e < n; ++e) {
            const auto a = static_cast<std::uint32_t>(rng() % n), b = static_cast<std::uint32_t>(rng() % n);
            if (a == b || std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end()) continue;
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        const auto g = WalkGraph::from_adjacency(GridFrame{{0, 0, 0}, 1.0}, 1.5, nodes, adj);
        const auto seed = static_cast<std::uint32_t>(rng() % n);
        const auto r = flood_fill_from(g, seed);
        const auto expect = oracle::component_of(g, seed);
        CHECK(std::set<std::uint32_t>(r.members.begin(), r.members.end()) == expect);
        CHECK(r.members.size() == expect.size());
        CHECK(r.members.front() == seed);
        for (std::uint32_t i = 0; i < n; ++i) CHECK(r.contains(i) == expect.contains(i));
    }
}

TEST_CASE("flood fill rejects a seed far from every walkable voxel") {
    std::vector<Voxel> nodes{{{0, 0, 0}, {0.25, 0.25, 0.25}, VoxelKind::TerrainSurface, 0.0}};
    const auto g = WalkGraph::from_adjacency(GridFrame{{0, 0, 0}, 0.5}, 0.75, nodes, {{}});
    CHECK(flood_fill(g, {0.5, 0.5, 0.25}).size() == 1);
    CHECK_THROWS_AS(flood_fill(g, {5.0, 5.0, 0.0}), Error);
}

TEST_CASE("voxel dump writes one line per voxel and edge") {
    const Scene sc = random_scene(4);
    AgentParams p;
    const auto g = build_walk_graph(classify_walkable(sc.grid, sc.hf, p), sc.grid, p, 0.75);
    const auto path = std::filesystem::temp_directory_path() / "navvox_dump_test.txt";
    dump_voxels(path, g);
    std::ifstream in(path);
    std::size_t lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == g.size() + g.edge_count());
    std::filesystem::remove(path);
}

}  // TEST_SUITE
