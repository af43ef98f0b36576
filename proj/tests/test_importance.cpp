#include <doctest.h>

#include "navvox/importance.hpp"
#include "navvox/synth.hpp"

using namespace navvox;

namespace {

WalkGraph flat_graph(double extent) {
    WorldSpec s;
    s.extent_x = extent;
    s.extent_y = extent;
    return build_fixture(s).recon.graph;
}

}  // namespace

TEST_SUITE("importance") {

TEST_CASE("marker parsing applies defaults, per-marker weights and overrides in that order") {
    const std::string text = R"([
        {"kind": "spawn_point", "position": [1, 2, 3]},
        {"kind": "interaction_zone", "position": [0, 0, 0], "weight": 2.5, "radius": 4},
        {"kind": "custom", "label": "door", "position": [5, 5, 0], "weight": 0.3},
        {"kind": "Patrol-Path", "position": [1, 1, 1], "weight": 0.9}
    ])";
    auto m = parse_markers(text);
    REQUIRE(m.size() == 4);
    CHECK(m[0].weight == 0.8);
    CHECK(m[0].radius == 5.0);
    CHECK(m[1].weight == 2.5);
    CHECK(m[1].radius == 4.0);
    CHECK(m[2].label == "door");
    CHECK(m[3].kind == MarkerKind::PatrolPath);

    KindWeights w;
    w.set_override("interaction_zone=7");
    w.set_override("custom:door=1.5");
    m = parse_markers(text, w);
    CHECK(m[1].weight == 7.0);
    CHECK(m[2].weight == 1.5);
    CHECK(m[3].weight == 0.9);

    CHECK_THROWS_AS(w.set_override("interaction_zone"), Error);
    CHECK_THROWS_AS(w.set_override("lava=1"), Error);
    CHECK_THROWS_AS(w.set_override("spawn_point=-1"), Error);
    CHECK_THROWS_AS(parse_markers(R"([{"kind": "boss", "position": [0, 0, 0]}])"), Error);
    CHECK_THROWS_AS(parse_markers(R"([{"kind": "custom", "position": [0, 0]}])"), Error);
    CHECK_THROWS_AS(parse_markers(R"([{"kind": "custom", "position": [0, 0, 0], "radius": 0}])"), Error);
    CHECK_THROWS_AS(parse_markers("{"), Error);
}

TEST_CASE("formatted markers parse back unchanged") {
    const auto m = parse_markers(R"([{"kind": "custom", "label": "x", "position": [0.1, 0.2, 0.3], "weight": 0.7, "radius": 2}])");
    const auto back = parse_markers(format_markers(m));
    REQUIRE(back.size() == 1);
    CHECK(back[0].position == m[0].position);
    CHECK(back[0].weight == m[0].weight);
    CHECK(back[0].radius == m[0].radius);
    CHECK(back[0].label == "x");
}

TEST_CASE("importance equals the brute-force marker sum, parallel and serial") {
    const WalkGraph g = flat_graph(8.0);
    std::vector<GameplayMarker> markers;
    for (int k = 0; k < 6; ++k) {
        GameplayMarker m;
        m.position = {1.0 + k * 1.1, 2.0 + 0.7 * k, 0.5};
        m.kind = MarkerKind::Custom;
        m.weight = 0.5 + 0.25 * k;
        m.radius = 1.5 + 0.2 * k;
        markers.push_back(m);
    }
    const auto field = compute_importance(g, markers);
    const auto serial = compute_importance_serial(g, markers);
    CHECK(field.values() == serial.values());
    double total = 0.0;
    for (std::uint32_t n = 0; n < g.size(); ++n) {
        double expect = 0.0;
        for (const auto& m : markers)
            if (distance(g.voxel(n).center, m.position) <= m.radius) expect += m.weight;
        CHECK(field.at(n) == doctest::Approx(expect));
        total += expect;
    }
    CHECK(field.total() == doctest::Approx(total));
    CHECK(importance_scale(markers) == doctest::Approx(1.75));
    CHECK(importance_scale({}) == 1.0);
}

TEST_CASE("coverage on a hand-computed micro field") {
    ImportanceField f({1.0, 2.0, 3.0, 0.0, 5.0}, {1, 1, 1, 1, 0});
    CHECK(f.total() == 6.0);
    CHECK(f.at(4) == 0.0);
    CHECK(coverage(f, std::vector<std::uint8_t>{1, 0, 1, 0, 0}) == doctest::Approx(4.0 / 6.0));
    CHECK(coverage(f, std::vector<std::uint8_t>{1, 1, 1, 1, 1}) == doctest::Approx(1.0));

    ImportanceField zero({0.0, 0.0, 0.0, 0.0}, {1, 1, 0, 1});
    CHECK(coverage(zero, std::vector<std::uint8_t>{1, 0, 1, 0}) == doctest::Approx(1.0 / 3.0));

    const auto r = f.restricted(std::vector<std::uint8_t>{0, 1, 1, 1, 1});
    CHECK(r.total() == 5.0);
    CHECK(r.domain_size() == 3);
    CHECK(f.scaled(2.0).total() == 12.0);
}

}  // TEST_SUITE
