#include <doctest.h>

#include <sstream>

#include "navvox/explore.hpp"
#include "navvox/rl.hpp"
#include "navvox/synth.hpp"

using namespace navvox;

namespace {

struct Scene {
    Fixture fx;
    ImportanceField field;
};

Scene make_scene(double extent, std::uint64_t seed = 1) {
    WorldSpec s;
    s.seed = seed;
    s.extent_x = extent;
    s.extent_y = extent;
    s.obstacles.boxes.push_back({{extent / 2, 1.0, -1.0}, {extent / 2 + 0.5, extent / 2, 3.0}, false});
    s.markers.clusters = 2;
    s.markers.per_cluster = 3;
    s.markers.spread = 1.5;
    s.markers.radius = 1.5;
    s.markers.centers = {{2.0, 2.0}, {extent - 2.0, extent - 2.0}};
    Scene sc{build_fixture(s), {}};
    sc.field = compute_importance(sc.fx.recon.graph, sc.fx.world.markers).restricted(sc.fx.recon.reach.mask);
    return sc;
}

bool adjacent(const WalkGraph& g, std::uint32_t a, std::uint32_t b) {
    const auto n = g.neighbors(a);
    return std::find(n.begin(), n.end(), b) != n.end();
}

}  // namespace

TEST_SUITE("explore") {

TEST_CASE("step follows the best aligned neighbour") {
    const Scene sc = make_scene(6.0);
    const auto& g = sc.fx.recon.graph;
    const auto c = *g.node_at_column(3, 3);
    CHECK(g.voxel(step(g, c, 0)).index == VoxelIndex{3, 4, g.voxel(c).index.z});
    CHECK(g.voxel(step(g, c, 2)).index == VoxelIndex{4, 3, g.voxel(c).index.z});
    CHECK(g.voxel(step(g, c, 5)).index == VoxelIndex{2, 2, g.voxel(c).index.z});
    for (int a = 0; a < kActionCount; ++a) {
        const auto d = action_direction(a);
        CHECK(std::hypot(d[0], d[1]) == doctest::Approx(1.0));
    }
    std::vector<Voxel> lone{g.voxel(0)};
    const auto single = WalkGraph::from_adjacency(g.frame(), g.radius(), lone, {{}});
    CHECK(step(single, 0, 3) == 0);
}

TEST_CASE("reward matches the hand formula") {
    ImportanceField f({0.0, 2.0, 0.5}, {1, 1, 1});
    const RewardParams p{0.01, 0.25};
    const std::vector<std::uint8_t> visited{1, 0, 1};
    CHECK(reward(f, 1, visited, p) == doctest::Approx(2.0 - 0.01));
    CHECK(reward(f, 2, visited, p) == doctest::Approx(-0.01 - 0.25));
    CHECK(reward(f, 0, std::vector<std::uint8_t>{0, 0, 0}, p) == doctest::Approx(-0.01));
}

TEST_CASE("env features equal the linear-scan encoder along a random walk") {
    const Scene sc = make_scene(10.0);
    const auto& g = sc.fx.recon.graph;
    const double scale = importance_scale(sc.fx.world.markers);
    ExploreEnv env(g, sc.field, sc.fx.recon.reach.seed, {}, scale);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 400; ++t) {
        const auto got = env.state();
        const auto expect = encode_state(g, sc.field, env.visited(), env.current(), env.steps_since_reward(), env.diameter());
        for (int k = 0; k < kStateDim; ++k) CHECK(got[k] == doctest::Approx(expect[k]).epsilon(1e-12));
        env.step(static_cast<int>(rng() % kActionCount));
    }
}

TEST_CASE("strategies are deterministic and respect their invariants") {
    const Scene sc = make_scene(10.0);
    const auto& g = sc.fx.recon.graph;
    ExploreEnv env(g, sc.field, sc.fx.recon.reach.seed, {}, importance_scale(sc.fx.world.markers));
    std::mt19937_64 rng(1);
    const QNetwork net = QNetwork::random(default_architecture(), rng);
    for (Strategy kind : {Strategy::Random, Strategy::RandomTeleport, Strategy::BFS, Strategy::DFS, Strategy::Heuristic,
                          Strategy::RL}) {
        StrategyOptions o;
        o.budget = 300;
        o.seed = 12;
        o.policy = &net;
        const Trajectory a = run_strategy(env, kind, o);
        const Trajectory b = run_strategy(env, kind, o);
        CHECK(a.nodes == b.nodes);
        CHECK(a.samples() == 300);
        CHECK(a.nodes.front() == sc.fx.recon.reach.seed);
        CHECK(a.rewards.size() == a.nodes.size() - 1);
        for (double c : a.coverage) CHECK((c >= 0.0 && c <= 1.0));
        for (std::size_t k = 1; k < a.coverage.size(); ++k) CHECK(a.coverage[k] >= a.coverage[k - 1]);
        for (auto n : a.nodes) CHECK(sc.fx.recon.reach.contains(n));
        if (kind == Strategy::Random || kind == Strategy::Heuristic || kind == Strategy::RL) {
            for (std::size_t k = 1; k < a.nodes.size(); ++k)
                CHECK((a.nodes[k] == a.nodes[k - 1] || adjacent(g, a.nodes[k - 1], a.nodes[k])));
        } else if (kind != Strategy::RandomTeleport) {
            CHECK(std::set<std::uint32_t>(a.nodes.begin(), a.nodes.end()).size() == std::min<std::size_t>(300, sc.fx.recon.reach.size()));
        }
        o.seed = 13;
        if (kind == Strategy::Random || kind == Strategy::RandomTeleport) CHECK(run_strategy(env, kind, o).nodes != a.nodes);
    }
}

TEST_CASE("bfs enumerates the whole reachable set when the budget allows") {
    const Scene sc = make_scene(8.0);
    ExploreEnv env(sc.fx.recon.graph, sc.field, sc.fx.recon.reach.seed);
    StrategyOptions o;
    o.budget = sc.fx.recon.reach.size();
    const auto t = run_strategy(env, Strategy::BFS, o);
    CHECK(t.nodes == sc.fx.recon.reach.members);
    CHECK(t.coverage.back() == doctest::Approx(1.0));
    CHECK(samples_to_coverage(t, 1.0).has_value());
}

TEST_CASE("invalid strategy options are rejected") {
    const Scene sc = make_scene(6.0);
    ExploreEnv env(sc.fx.recon.graph, sc.field, sc.fx.recon.reach.seed);
    StrategyOptions o;
    CHECK_THROWS_AS(run_strategy(env, Strategy::BFS, o), Error);
    o.budget = 10;
    CHECK_THROWS_AS(run_strategy(env, Strategy::RL, o), Error);
    CHECK_THROWS_AS(parse_strategy("greedy"), Error);
    CHECK(parse_strategy("random-teleport") == Strategy::RandomTeleport);
}

TEST_CASE("samples to coverage counts the start voxel") {
    Trajectory t;
    t.nodes = {0, 1, 2, 3};
    t.coverage = {0.0, 0.5, 0.85, 1.0};
    CHECK(samples_to_coverage(t, 0.85) == 3u);
    CHECK(samples_to_coverage(t, 0.5) == 2u);
    t.coverage = {0.0, 0.1, 0.2, 0.3};
    CHECK_FALSE(samples_to_coverage(t, 0.85).has_value());
}

TEST_CASE("heuristic heads for the most important voxel within its horizon") {
    const Scene sc = make_scene(10.0);
    ExploreEnv env(sc.fx.recon.graph, sc.field, sc.fx.recon.reach.seed);
    StrategyOptions o;
    o.budget = 400;
    const auto t = run_strategy(env, Strategy::Heuristic, o);
    const auto r = run_strategy(env, Strategy::Random, o);
    CHECK(t.coverage.back() >= r.coverage.back());
    CHECK(t.coverage.back() > 0.9);
}

TEST_CASE("trajectory dump has one JSON line per sample") {
    const Scene sc = make_scene(6.0);
    ExploreEnv env(sc.fx.recon.graph, sc.field, sc.fx.recon.reach.seed);
    StrategyOptions o;
    o.budget = 25;
    const auto t = run_strategy(env, Strategy::Random, o);
    std::ostringstream out;
    write_trajectory_jsonl(out, sc.fx.recon.graph, t);
    std::istringstream in(out.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("step").get<std::size_t>() == n);
        CHECK(j.at("voxel").size() == 3);
        ++n;
    }
    CHECK(n == 25);
}

}  // TEST_SUITE
