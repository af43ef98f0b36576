#include "navvox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace navvox {

namespace {

using json = nlohmann::json;
using Column = ReferenceLayout::Column;

// Independent generator per purpose so adding obstacles does not shift marker positions.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw Error(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::array<double, 2> read_xy(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw Error(where + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 read_xyz(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw Error(where + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json xyz(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

TerrainKind parse_terrain_kind(const std::string& s) {
    if (s == "flat") return TerrainKind::Flat;
    if (s == "ramp") return TerrainKind::Ramp;
    if (s == "noise") return TerrainKind::Noise;
    if (s == "staircase") return TerrainKind::Staircase;
    throw Error("unknown terrain profile '" + s + "'");
}

void add_box(CollisionMesh& mesh, const Vec3& lo, const Vec3& hi) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int k = 0; k < 8; ++k)
        mesh.vertices.push_back({(k & 1) ? hi.x : lo.x, (k & 2) ? hi.y : lo.y, (k & 4) ? hi.z : lo.z});
    static constexpr std::array<std::array<std::uint32_t, 3>, 12> faces{{
        {0, 2, 1}, {1, 2, 3},  // bottom
        {4, 5, 6}, {5, 7, 6},  // top
        {0, 1, 4}, {1, 5, 4},  // -y
        {2, 6, 3}, {3, 6, 7},  // +y
        {0, 4, 2}, {2, 4, 6},  // -x
        {1, 3, 5}, {3, 7, 5},  // +x
    }};
    for (const auto& f : faces) mesh.triangles.push_back({base + f[0], base + f[1], base + f[2]});
}

double rect_distance(double px, double py, double x0, double y0, double x1, double y1) {
    const double dx = std::max({x0 - px, 0.0, px - x1});
    const double dy = std::max({y0 - py, 0.0, py - y1});
    return std::hypot(dx, dy);
}

struct UnionFind {
    std::vector<std::uint32_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::uint32_t>(i);
    }
    std::uint32_t find(std::uint32_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::pair<Column, Column> ordered(Column a, Column b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

std::string to_string(TerrainKind kind) {
    switch (kind) {
        case TerrainKind::Flat: return "flat";
        case TerrainKind::Ramp: return "ramp";
        case TerrainKind::Noise: return "noise";
        case TerrainKind::Staircase: return "staircase";
    }
    return "flat";
}

std::string to_string(DefectKind kind) {
    switch (kind) {
        case DefectKind::RemovePolygons: return "remove_polygons";
        case DefectKind::ShrinkMesh: return "shrink_mesh";
        case DefectKind::PhantomPolygons: return "phantom_polygons";
        case DefectKind::DisconnectIsland: return "disconnect_island";
    }
    return "remove_polygons";
}

DefectKind parse_defect_kind(const std::string& text) {
    for (auto k : {DefectKind::RemovePolygons, DefectKind::ShrinkMesh, DefectKind::PhantomPolygons,
                   DefectKind::DisconnectIsland})
        if (text == to_string(k)) return k;
    throw Error("unknown defect kind '" + text + "'");
}

double TerrainProfile::height(double x, double y) const {
    double h = base;
    switch (kind) {
        case TerrainKind::Flat: break;
        case TerrainKind::Ramp: h += slope * x; break;
        case TerrainKind::Noise:
            for (const auto& w : waves)
                h += w.amplitude * std::sin(w.wavenumber * (std::cos(w.direction) * x + std::sin(w.direction) * y) + w.phase);
            break;
        case TerrainKind::Staircase: h += riser * std::floor(x / tread + 1e-9); break;
    }
    for (const auto& m : mesas)
        if (std::abs(x - m.center_x) <= m.half_size && std::abs(y - m.center_y) <= m.half_size) h += m.height;
    return h;
}

std::array<double, 2> TerrainProfile::gradient(double x, double y) const {
    std::array<double, 2> g{0.0, 0.0};
    if (kind == TerrainKind::Ramp) {
        g[0] = slope;
    } else if (kind == TerrainKind::Noise) {
        for (const auto& w : waves) {
            const double c = std::cos(w.direction), s = std::sin(w.direction);
            const double d = w.amplitude * w.wavenumber * std::cos(w.wavenumber * (c * x + s * y) + w.phase);
            g[0] += d * c;
            g[1] += d * s;
        }
    }
    return g;
}

void WorldSpec::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string("world spec: ") + what + " must be positive");
    };
    positive(extent_x, "extent x");
    positive(extent_y, "extent y");
    positive(hf_cell_size, "hf_cell_size");
    positive(resolution, "resolution");
    agent.validate();
    // The reference navmesh relies on a voxel center lying within the step height of its own surface.
    if (resolution / 2.0 > agent.step_height) throw Error("world spec: resolution must be at most twice the step height");
    if (seed_xy) {
        const auto [x, y] = *seed_xy;
        if (x < origin.x || x > origin.x + extent_x || y < origin.y || y > origin.y + extent_y)
            throw Error("world spec: seed position outside the extent");
    }
    if (terrain.kind == TerrainKind::Noise && (terrain.octaves < 1 || terrain.octaves > 8))
        throw Error("world spec: octaves must be in [1, 8]");
    if (terrain.kind == TerrainKind::Staircase) positive(terrain.tread, "tread");
    for (const auto& m : terrain.mesas) positive(m.half_size, "mesa half_size");
    positive(obstacles.min_size, "obstacle min_size");
    positive(obstacles.min_height, "obstacle min_height");
    if (obstacles.max_size < obstacles.min_size || obstacles.max_height < obstacles.min_height)
        throw Error("world spec: obstacle ranges must satisfy min <= max");
    for (const auto& b : obstacles.boxes)
        if (!(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z))
            throw Error("world spec: box min must be below max on every axis");
    positive(markers.radius, "marker radius");
    if (markers.spread < 0.0) throw Error("world spec: marker spread must be >= 0");
    if (markers.clusters > 0 && markers.kinds.empty()) throw Error("world spec: marker kinds must not be empty");
    for (const auto& d : defects) {
        if (d.kind == DefectKind::ShrinkMesh) {
            positive(d.margin, "shrink margin");
            continue;
        }
        if (!(d.min[0] < d.max[0] && d.min[1] < d.max[1])) throw Error("world spec: defect region min must be below max");
        if (d.min[0] < origin.x || d.min[1] < origin.y || d.max[0] > origin.x + extent_x || d.max[1] > origin.y + extent_y)
            throw Error("world spec: defect region outside the world extent");
    }
    if (random_defects.count > 0) {
        if (random_defects.min_cells == 0 || random_defects.max_cells < random_defects.min_cells)
            throw Error("world spec: random defect sizes must satisfy 1 <= min_cells <= max_cells");
        if (random_defects.kinds.empty()) throw Error("world spec: random defect kinds must not be empty");
    }
}

WorldSpec parse_world_spec(const json& j) {
    check_keys(j, {"seed", "origin", "extent", "hf_cell_size", "resolution", "agent", "seed_position", "terrain",
                   "obstacles", "markers", "defects", "random_defects"},
               "world spec");
    WorldSpec s;
    try {
        read(j, "seed", s.seed);
        if (j.contains("origin")) s.origin = read_xyz(j["origin"], "origin");
        if (j.contains("extent")) {
            const auto e = read_xy(j["extent"], "extent");
            s.extent_x = e[0];
            s.extent_y = e[1];
        }
        read(j, "hf_cell_size", s.hf_cell_size);
        read(j, "resolution", s.resolution);
        if (j.contains("agent")) {
            const auto& a = j["agent"];
            check_keys(a, {"max_slope_deg", "step_height", "radius", "height"}, "agent");
            if (a.contains("max_slope_deg")) s.agent.max_slope = a["max_slope_deg"].get<double>() * std::numbers::pi / 180.0;
            read(a, "step_height", s.agent.step_height);
            read(a, "radius", s.agent.radius);
            read(a, "height", s.agent.height);
        }
        if (j.contains("seed_position")) s.seed_xy = read_xy(j["seed_position"], "seed_position");
        if (j.contains("terrain")) {
            const auto& t = j["terrain"];
            check_keys(t, {"profile", "base", "slope", "amplitude", "frequency", "octaves", "riser", "tread", "mesas", "waves"},
                       "terrain");
            if (t.contains("profile")) s.terrain.kind = parse_terrain_kind(t["profile"].get<std::string>());
            read(t, "base", s.terrain.base);
            read(t, "slope", s.terrain.slope);
            read(t, "amplitude", s.terrain.amplitude);
            read(t, "frequency", s.terrain.frequency);
            read(t, "octaves", s.terrain.octaves);
            read(t, "riser", s.terrain.riser);
            read(t, "tread", s.terrain.tread);
            for (const auto& m : t.value("mesas", json::array())) {
                check_keys(m, {"center", "half_size", "height"}, "mesa");
                Mesa mesa;
                const auto c = read_xy(m.at("center"), "mesa center");
                mesa.center_x = c[0];
                mesa.center_y = c[1];
                read(m, "half_size", mesa.half_size);
                read(m, "height", mesa.height);
                s.terrain.mesas.push_back(mesa);
            }
            for (const auto& w : t.value("waves", json::array())) {
                check_keys(w, {"amplitude", "wavenumber", "direction", "phase"}, "wave");
                s.terrain.waves.push_back({w.at("amplitude").get<double>(), w.at("wavenumber").get<double>(),
                                           w.at("direction").get<double>(), w.at("phase").get<double>()});
            }
        }
        if (j.contains("obstacles")) {
            const auto& o = j["obstacles"];
            check_keys(o, {"count", "min_size", "max_size", "min_height", "max_height", "seed_clearance", "excluded_props", "boxes"},
                       "obstacles");
            read(o, "count", s.obstacles.count);
            read(o, "min_size", s.obstacles.min_size);
            read(o, "max_size", s.obstacles.max_size);
            read(o, "min_height", s.obstacles.min_height);
            read(o, "max_height", s.obstacles.max_height);
            read(o, "seed_clearance", s.obstacles.seed_clearance);
            read(o, "excluded_props", s.obstacles.excluded_props);
            for (const auto& b : o.value("boxes", json::array())) {
                check_keys(b, {"min", "max", "nav_excluded"}, "box");
                BoxSpec box{read_xyz(b.at("min"), "box min"), read_xyz(b.at("max"), "box max"), b.value("nav_excluded", false)};
                s.obstacles.boxes.push_back(box);
            }
        }
        if (j.contains("markers")) {
            const auto& m = j["markers"];
            check_keys(m, {"clusters", "per_cluster", "spread", "radius", "height_offset", "kinds", "centers", "weights"}, "markers");
            read(m, "clusters", s.markers.clusters);
            read(m, "per_cluster", s.markers.per_cluster);
            read(m, "spread", s.markers.spread);
            read(m, "radius", s.markers.radius);
            read(m, "height_offset", s.markers.height_offset);
            if (m.contains("kinds")) {
                s.markers.kinds.clear();
                for (const auto& k : m["kinds"]) s.markers.kinds.push_back(parse_marker_kind(k.get<std::string>()));
            }
            for (const auto& c : m.value("centers", json::array())) s.markers.centers.push_back(read_xy(c, "marker center"));
            if (s.markers.clusters < s.markers.centers.size()) s.markers.clusters = s.markers.centers.size();
            for (const auto& [k, w] : m.value("weights", json::object()).items())
                s.markers.weights[to_string(parse_marker_kind(k))] = w.get<double>();
        }
        for (const auto& d : j.value("defects", json::array())) {
            check_keys(d, {"kind", "min", "max", "margin"}, "defect");
            DefectInjection inj;
            inj.kind = parse_defect_kind(d.at("kind").get<std::string>());
            if (inj.kind == DefectKind::ShrinkMesh) {
                inj.margin = d.at("margin").get<double>();
            } else {
                inj.min = read_xy(d.at("min"), "defect min");
                inj.max = read_xy(d.at("max"), "defect max");
            }
            s.defects.push_back(inj);
        }
        if (j.contains("random_defects")) {
            const auto& r = j["random_defects"];
            check_keys(r, {"count", "min_cells", "max_cells", "seed_clearance", "gap_cells", "kinds"}, "random_defects");
            read(r, "count", s.random_defects.count);
            read(r, "min_cells", s.random_defects.min_cells);
            read(r, "max_cells", s.random_defects.max_cells);
            read(r, "seed_clearance", s.random_defects.seed_clearance);
            read(r, "gap_cells", s.random_defects.gap_cells);
            if (r.contains("kinds")) {
                s.random_defects.kinds.clear();
                for (const auto& k : r["kinds"]) s.random_defects.kinds.push_back(parse_defect_kind(k.get<std::string>()));
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("world spec: ") + e.what());
    }
    s.validate();
    return s;
}

WorldSpec load_world_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return parse_world_spec(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

json to_json(const WorldSpec& s) {
    json j;
    j["seed"] = s.seed;
    j["origin"] = xyz(s.origin);
    j["extent"] = {s.extent_x, s.extent_y};
    j["hf_cell_size"] = s.hf_cell_size;
    j["resolution"] = s.resolution;
    j["agent"] = {{"max_slope_deg", s.agent.max_slope * 180.0 / std::numbers::pi},
                  {"step_height", s.agent.step_height},
                  {"radius", s.agent.radius},
                  {"height", s.agent.height}};
    if (s.seed_xy) j["seed_position"] = {(*s.seed_xy)[0], (*s.seed_xy)[1]};
    json t{{"profile", to_string(s.terrain.kind)}, {"base", s.terrain.base}};
    switch (s.terrain.kind) {
        case TerrainKind::Flat: break;
        case TerrainKind::Ramp: t["slope"] = s.terrain.slope; break;
        case TerrainKind::Noise:
            t["amplitude"] = s.terrain.amplitude;
            t["frequency"] = s.terrain.frequency;
            t["octaves"] = s.terrain.octaves;
            break;
        case TerrainKind::Staircase:
            t["riser"] = s.terrain.riser;
            t["tread"] = s.terrain.tread;
            break;
    }
    if (!s.terrain.mesas.empty()) {
        t["mesas"] = json::array();
        for (const auto& m : s.terrain.mesas)
            t["mesas"].push_back({{"center", {m.center_x, m.center_y}}, {"half_size", m.half_size}, {"height", m.height}});
    }
    if (!s.terrain.waves.empty()) {
        t["waves"] = json::array();
        for (const auto& w : s.terrain.waves)
            t["waves"].push_back(
                {{"amplitude", w.amplitude}, {"wavenumber", w.wavenumber}, {"direction", w.direction}, {"phase", w.phase}});
    }
    j["terrain"] = t;
    json o{{"count", s.obstacles.count},           {"min_size", s.obstacles.min_size},
           {"max_size", s.obstacles.max_size},     {"min_height", s.obstacles.min_height},
           {"max_height", s.obstacles.max_height}, {"seed_clearance", s.obstacles.seed_clearance},
           {"excluded_props", s.obstacles.excluded_props}, {"boxes", json::array()}};
    for (const auto& b : s.obstacles.boxes)
        o["boxes"].push_back({{"min", xyz(b.min)}, {"max", xyz(b.max)}, {"nav_excluded", b.nav_excluded}});
    j["obstacles"] = o;
    json m{{"clusters", s.markers.clusters},
           {"per_cluster", s.markers.per_cluster},
           {"spread", s.markers.spread},
           {"radius", s.markers.radius},
           {"height_offset", s.markers.height_offset},
           {"kinds", json::array()},
           {"centers", json::array()},
           {"weights", json::object()}};
    for (auto k : s.markers.kinds) m["kinds"].push_back(to_string(k));
    for (const auto& c : s.markers.centers) m["centers"].push_back({c[0], c[1]});
    for (const auto& [k, w] : s.markers.weights) m["weights"][k] = w;
    j["markers"] = m;
    j["defects"] = json::array();
    for (const auto& d : s.defects) {
        json dj{{"kind", to_string(d.kind)}};
        if (d.kind == DefectKind::ShrinkMesh) {
            dj["margin"] = d.margin;
        } else {
            dj["min"] = {d.min[0], d.min[1]};
            dj["max"] = {d.max[0], d.max[1]};
        }
        j["defects"].push_back(dj);
    }
    json r{{"count", s.random_defects.count},
           {"min_cells", s.random_defects.min_cells},
           {"max_cells", s.random_defects.max_cells},
           {"seed_clearance", s.random_defects.seed_clearance},
           {"gap_cells", s.random_defects.gap_cells},
           {"kinds", json::array()}};
    for (auto k : s.random_defects.kinds) r["kinds"].push_back(to_string(k));
    j["random_defects"] = r;
    return j;
}

World generate_world(const WorldSpec& spec_in) {
    spec_in.validate();
    World w;
    w.spec = spec_in;
    auto& spec = w.spec;
    auto& terrain = spec.terrain;
    if (terrain.kind == TerrainKind::Noise && terrain.waves.empty()) {
        auto rng = stream(spec.seed, 1);
        for (int o = 0; o < terrain.octaves; ++o) {
            for (int k = 0; k < 2; ++k) {
                NoiseWave wave;
                wave.amplitude = terrain.amplitude * std::pow(0.5, o) / 2.0;
                wave.wavenumber = 2.0 * std::numbers::pi * terrain.frequency * std::pow(2.0, o);
                wave.direction = uniform(rng, 0.0, std::numbers::pi);
                wave.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
                terrain.waves.push_back(wave);
            }
        }
    }

    auto& hf = w.hf;
    hf.origin = spec.origin;
    hf.cell_size = spec.hf_cell_size;
    hf.width = static_cast<int>(std::floor(spec.extent_x / spec.hf_cell_size + 1e-9)) + 1;
    hf.depth = static_cast<int>(std::floor(spec.extent_y / spec.hf_cell_size + 1e-9)) + 1;
    hf.heights.resize(static_cast<std::size_t>(hf.width) * hf.depth);
    for (int j = 0; j < hf.depth; ++j)
        for (int i = 0; i < hf.width; ++i)
            hf.heights[static_cast<std::size_t>(j) * hf.width + i] = terrain.height(i * hf.cell_size, j * hf.cell_size);
    hf.validate();
    const auto [hmin, hmax] = std::minmax_element(hf.heights.begin(), hf.heights.end());

    const double sx = spec.seed_xy ? (*spec.seed_xy)[0] : spec.origin.x + spec.extent_x / 2.0;
    const double sy = spec.seed_xy ? (*spec.seed_xy)[1] : spec.origin.y + spec.extent_y / 2.0;
    w.seed = {sx, sy, hf.sample(sx, sy)};

    // Lowest and highest terrain under a footprint, from a 5x5 sample lattice plus the hf samples inside.
    auto footprint_range = [&](double x0, double y0, double x1, double y1) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int a = 0; a <= 4; ++a)
            for (int b = 0; b <= 4; ++b) {
                const double h = hf.sample(x0 + (x1 - x0) * a / 4.0, y0 + (y1 - y0) * b / 4.0);
                lo = std::min(lo, h);
                hi = std::max(hi, h);
            }
        for (int j = 0; j < hf.depth; ++j) {
            const double y = hf.origin.y + j * hf.cell_size;
            if (y < y0 || y > y1) continue;
            for (int i = 0; i < hf.width; ++i) {
                const double x = hf.origin.x + i * hf.cell_size;
                if (x < x0 || x > x1) continue;
                lo = std::min(lo, hf.at(i, j));
                hi = std::max(hi, hf.at(i, j));
            }
        }
        return std::pair{lo, hi};
    };

    CollisionMesh obstacles, props;
    props.nav_excluded = true;
    for (const auto& b : spec.obstacles.boxes) add_box(b.nav_excluded ? props : obstacles, b.min, b.max);
    {
        auto rng = stream(spec.seed, 2);
        const auto& os = spec.obstacles;
        for (std::size_t k = 0; k < os.count; ++k) {
            for (int attempt = 0; attempt < 200; ++attempt) {
                const double wx = uniform(rng, os.min_size, os.max_size);
                const double wy = uniform(rng, os.min_size, os.max_size);
                const double height = uniform(rng, os.min_height, os.max_height);
                if (wx >= spec.extent_x || wy >= spec.extent_y) break;
                const double x0 = spec.origin.x + uniform(rng, 0.0, spec.extent_x - wx);
                const double y0 = spec.origin.y + uniform(rng, 0.0, spec.extent_y - wy);
                if (rect_distance(sx, sy, x0, y0, x0 + wx, y0 + wy) < os.seed_clearance) continue;
                const auto [lo, hi] = footprint_range(x0, y0, x0 + wx, y0 + wy);
                add_box(obstacles, {x0, y0, lo - 0.5}, {x0 + wx, y0 + wy, hi + height});
                break;
            }
        }
        for (std::size_t k = 0; k < os.excluded_props; ++k) {
            const double wx = uniform(rng, 0.4, 1.0);
            const double wy = uniform(rng, 0.4, 1.0);
            const double x0 = spec.origin.x + uniform(rng, 0.0, spec.extent_x - wx);
            const double y0 = spec.origin.y + uniform(rng, 0.0, spec.extent_y - wy);
            const auto [lo, hi] = footprint_range(x0, y0, x0 + wx, y0 + wy);
            add_box(props, {x0, y0, lo - 0.2}, {x0 + wx, y0 + wy, hi + 1.2});
        }
    }
    w.meshes.push_back(std::move(obstacles));
    w.meshes.push_back(std::move(props));

    {
        auto rng = stream(spec.seed, 3);
        const auto& ms = spec.markers;
        const KindWeights defaults;
        const double margin = std::min({ms.spread + 1.0, spec.extent_x / 2.0, spec.extent_y / 2.0});
        std::size_t n = 0;
        for (std::size_t c = 0; c < ms.clusters; ++c) {
            std::array<double, 2> center;
            if (c < ms.centers.size()) {
                center = ms.centers[c];
            } else {
                center = {spec.origin.x + uniform(rng, margin, spec.extent_x - margin),
                          spec.origin.y + uniform(rng, margin, spec.extent_y - margin)};
            }
            for (std::size_t k = 0; k < ms.per_cluster; ++k, ++n) {
                const double rho = ms.spread * std::sqrt(uniform(rng, 0.0, 1.0));
                const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
                const double x = std::clamp(center[0] + rho * std::cos(phi), spec.origin.x, hf.max_x());
                const double y = std::clamp(center[1] + rho * std::sin(phi), spec.origin.y, hf.max_y());
                GameplayMarker m;
                m.kind = ms.kinds[n % ms.kinds.size()];
                m.position = {x, y, hf.sample(x, y) + ms.height_offset};
                const auto it = ms.weights.find(to_string(m.kind));
                m.weight = it != ms.weights.end() ? it->second : defaults.default_for(m.kind);
                m.radius = ms.radius;
                w.markers.push_back(m);
            }
        }
    }

    w.region.min = {spec.origin.x, spec.origin.y, *hmin - 1.0};
    w.region.max = {spec.origin.x + spec.extent_x, spec.origin.y + spec.extent_y,
                    *hmax + spec.agent.height + 2.0 * spec.resolution + 2.0};
    return w;
}

ReconstructOptions reconstruct_options(const WorldSpec& spec) {
    ReconstructOptions o;
    o.resolution = spec.resolution;
    o.agent = spec.agent;
    return o;
}

bool ReferenceLayout::linked(Column a, Column b) const { return links_.contains(ordered(a, b)); }

void ReferenceLayout::remove_cell(Column c) {
    if (cells_.erase(c) == 0) return;
    const std::array<Column, 4> around{{{c.first - 1, c.second}, {c.first + 1, c.second}, {c.first, c.second - 1},
                                        {c.first, c.second + 1}}};
    for (const auto& n : around) links_.erase(ordered(c, n));
}

void ReferenceLayout::link(Column a, Column b) {
    if (std::abs(a.first - b.first) + std::abs(a.second - b.second) != 1)
        throw Error("layout links must join orthogonal neighbours");
    if (!has_cell(a) || !has_cell(b)) throw Error("layout link endpoint has no cell");
    links_.insert(ordered(a, b));
}

void ReferenceLayout::unlink(Column a, Column b) { links_.erase(ordered(a, b)); }

std::map<Column, std::uint32_t> ReferenceLayout::components() const {
    std::map<Column, std::uint32_t> index;
    std::uint32_t n = 0;
    for (const auto& [c, h] : cells_) index.emplace(c, n++);
    UnionFind uf(n);
    for (const auto& [a, b] : links_) uf.unite(index.at(a), index.at(b));
    std::unordered_map<std::uint32_t, std::uint32_t> label;
    std::map<Column, std::uint32_t> out;
    for (const auto& [c, i] : index) {
        const auto root = uf.find(i);
        const auto [it, fresh] = label.emplace(root, static_cast<std::uint32_t>(label.size()));
        (void)fresh;
        out.emplace(c, it->second);
    }
    return out;
}

ReferenceLayout layout_from_graph(const WalkGraph& graph) {
    ReferenceLayout layout(graph.frame());
    for (const auto& v : graph.voxels()) layout.set_cell({v.index.x, v.index.y}, v.surface);
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        const auto& a = graph.voxel(i).index;
        for (auto j : graph.neighbors(i)) {
            const auto& b = graph.voxel(j).index;
            if (j > i && std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1) layout.link({a.x, a.y}, {b.x, b.y});
        }
    }
    return layout;
}

namespace {

class Emitter {
public:
    explicit Emitter(const ReferenceLayout& layout) : layout_(layout), frame_(layout.frame()) {}

    NavMesh run() {
        std::vector<Column> order;
        order.reserve(layout_.cells().size());
        for (const auto& [c, h] : layout_.cells()) order.push_back(c);
        std::sort(order.begin(), order.end(), [](const Column& a, const Column& b) {
            return std::pair{a.second, a.first} < std::pair{b.second, b.first};
        });
        std::unordered_set<std::uint64_t> done;
        for (const auto& c : order) {
            if (done.contains(key(c))) continue;
            const double h = layout_.cells().at(c);
            if (!flat(c, h)) {
                fan(c, h);
                done.insert(key(c));
                continue;
            }
            auto mergeable = [&](Column n) {
                const auto it = layout_.cells().find(n);
                return it != layout_.cells().end() && it->second == h && !done.contains(key(n)) && flat(n, h);
            };
            const auto [x0, y0] = c;
            std::int32_t x1 = x0, y1 = y0;
            while (mergeable({x1 + 1, y0}) && layout_.linked({x1, y0}, {x1 + 1, y0})) ++x1;
            for (;;) {
                const std::int32_t y = y1 + 1;
                bool ok = true;
                for (std::int32_t x = x0; x <= x1 && ok; ++x) {
                    ok = mergeable({x, y}) && layout_.linked({x, y1}, {x, y}) && (x == x0 || layout_.linked({x - 1, y}, {x, y}));
                }
                if (!ok) break;
                y1 = y;
            }
            for (std::int32_t y = y0; y <= y1; ++y)
                for (std::int32_t x = x0; x <= x1; ++x) done.insert(key({x, y}));
            std::vector<std::uint32_t> poly;
            for (std::int32_t x = x0; x <= x1; ++x) poly.push_back(corner(x, y0, {x, y0}));
            for (std::int32_t y = y0; y <= y1; ++y) poly.push_back(corner(x1 + 1, y, {x1, y}));
            for (std::int32_t x = x1 + 1; x > x0; --x) poly.push_back(corner(x, y1 + 1, {x - 1, y1}));
            for (std::int32_t y = y1 + 1; y > y0; --y) poly.push_back(corner(x0, y, {x0, y - 1}));
            polygons_.push_back(std::move(poly));
        }
        return NavMesh::from_polygons(std::move(vertices_), std::move(polygons_));
    }

private:
    static std::uint64_t key(Column c) { return pack_column(c.first, c.second); }

    // Vertex of grid point (X, Y) as seen from an adjacent cell. Cells around
    // the point share a vertex when linked to each other.
    std::uint32_t corner(std::int32_t X, std::int32_t Y, Column cell) {
        const int slot = (cell.first == X ? 1 : 0) + (cell.second == Y ? 2 : 0);
        auto [it, fresh] = corners_.try_emplace(pack_column(X, Y));
        if (fresh) {
            const std::array<Column, 4> around{{{X - 1, Y - 1}, {X, Y - 1}, {X - 1, Y}, {X, Y}}};
            std::array<bool, 4> present{};
            for (int k = 0; k < 4; ++k) present[k] = layout_.has_cell(around[k]);
            UnionFind uf(4);
            for (auto [a, b] : {std::pair{0, 1}, std::pair{2, 3}, std::pair{0, 2}, std::pair{1, 3}})
                if (present[a] && present[b] && layout_.linked(around[a], around[b])) uf.unite(a, b);
            it->second.fill(std::numeric_limits<std::uint32_t>::max());
            for (int k = 0; k < 4; ++k) {
                if (!present[k] || it->second[k] != std::numeric_limits<std::uint32_t>::max()) continue;
                std::vector<double> hs;
                for (int m = 0; m < 4; ++m)
                    if (present[m] && uf.find(m) == uf.find(k)) hs.push_back(layout_.cells().at(around[m]));
                double z = hs.front();
                if (std::any_of(hs.begin(), hs.end(), [&](double v) { return v != z; })) {
                    z = 0.0;
                    for (double v : hs) z += v;
                    z /= static_cast<double>(hs.size());
                }
                const auto id = static_cast<std::uint32_t>(vertices_.size());
                vertices_.push_back({frame_.origin.x + X * frame_.resolution, frame_.origin.y + Y * frame_.resolution, z});
                for (int m = 0; m < 4; ++m)
                    if (present[m] && uf.find(m) == uf.find(k)) it->second[m] = id;
            }
        }
        const auto id = it->second[slot];
        if (id == std::numeric_limits<std::uint32_t>::max()) throw Error("layout corner has no cell");
        return id;
    }

    bool flat(Column c, double h) {
        const auto [x, y] = c;
        for (auto id : {corner(x, y, c), corner(x + 1, y, c), corner(x + 1, y + 1, c), corner(x, y + 1, c)})
            if (vertices_[id].z != h) return false;
        return true;
    }

    void fan(Column c, double h) {
        const auto [x, y] = c;
        const std::array<std::uint32_t, 4> ring{corner(x, y, c), corner(x + 1, y, c), corner(x + 1, y + 1, c),
                                                corner(x, y + 1, c)};
        const auto center = static_cast<std::uint32_t>(vertices_.size());
        vertices_.push_back({frame_.origin.x + (x + 0.5) * frame_.resolution, frame_.origin.y + (y + 0.5) * frame_.resolution, h});
        for (int k = 0; k < 4; ++k) polygons_.push_back({ring[k], ring[(k + 1) % 4], center});
    }

    const ReferenceLayout& layout_;
    GridFrame frame_;
    std::vector<Vec3> vertices_;
    std::vector<std::vector<std::uint32_t>> polygons_;
    std::unordered_map<std::uint64_t, std::array<std::uint32_t, 4>> corners_;
};

}  // namespace

NavMesh emit_reference_navmesh(const ReferenceLayout& layout) {
    if (layout.cells().empty()) throw Error("reference layout has no cells");
    return Emitter(layout).run();
}

std::vector<std::uint32_t> layout_ground_truth(const ReferenceLayout& layout, const Reconstruction& recon) {
    const auto comps = layout.components();
    const auto& seed = recon.graph.voxel(recon.reach.seed).index;
    const auto sc = comps.find({seed.x, seed.y});
    if (sc == comps.end()) throw Error("layout has no cell under the seed");
    std::vector<std::uint32_t> out;
    for (std::uint32_t n = 0; n < recon.graph.size(); ++n) {
        const auto& v = recon.graph.voxel(n).index;
        const auto it = comps.find({v.x, v.y});
        const bool nav = it != comps.end() && it->second == sc->second;
        if (nav != recon.reach.contains(n)) out.push_back(n);
    }
    return out;
}

InjectionResult inject_defects(const ReferenceLayout& base, std::span<const DefectInjection> injections,
                               const Reconstruction& recon, const WorldSpec& spec) {
    InjectionResult r;
    r.layout = base;
    auto& layout = r.layout;
    const auto& f = layout.frame();
    const double s = f.resolution;
    const auto& seed_voxel = recon.graph.voxel(recon.reach.seed).index;
    const Column seed_col{seed_voxel.x, seed_voxel.y};
    const double seed_x0 = f.origin.x + seed_col.first * s, seed_y0 = f.origin.y + seed_col.second * s;
    auto cx = [&](std::int32_t x) { return f.origin.x + (x + 0.5) * s; };
    auto cy = [&](std::int32_t y) { return f.origin.y + (y + 0.5) * s; };

    for (const auto& inj : injections) {
        if (inj.kind == DefectKind::ShrinkMesh) {
            if (!(inj.margin > 0.0)) throw Error("shrink margin must be positive");
            const auto reach = static_cast<std::int32_t>(std::ceil(inj.margin / s)) + 1;
            std::vector<Column> drop;
            for (const auto& [c, h] : layout.cells()) {
                bool hit = false;
                for (std::int32_t dy = -reach; dy <= reach && !hit; ++dy)
                    for (std::int32_t dx = -reach; dx <= reach && !hit; ++dx) {
                        if (layout.has_cell({c.first + dx, c.second + dy})) continue;
                        const double gx = std::max(0.0, std::abs(dx) * s - s / 2.0);
                        const double gy = std::max(0.0, std::abs(dy) * s - s / 2.0);
                        hit = std::hypot(gx, gy) <= inj.margin + 1e-9;
                    }
                if (hit) drop.push_back(c);
            }
            if (std::find(drop.begin(), drop.end(), seed_col) != drop.end())
                throw Error("shrink_mesh would remove the seed cell");
            for (const auto& c : drop) layout.remove_cell(c);
            continue;
        }
        if (!(inj.min[0] < inj.max[0] && inj.min[1] < inj.max[1])) throw Error("defect region min must be below max");
        if (inj.min[0] < spec.origin.x || inj.min[1] < spec.origin.y || inj.max[0] > spec.origin.x + spec.extent_x ||
            inj.max[1] > spec.origin.y + spec.extent_y)
            throw Error(to_string(inj.kind) + " region outside the world extent");
        if (rect_distance(seed_x0 + s / 2.0, seed_y0 + s / 2.0, inj.min[0], inj.min[1], inj.max[0], inj.max[1]) <= s * 1.5)
            throw Error(to_string(inj.kind) + " region touches the navmesh seed cell");
        const std::int32_t ix0 = f.cell_x(inj.min[0]) - 1, ix1 = f.cell_x(inj.max[0]) + 1;
        const std::int32_t iy0 = f.cell_y(inj.min[1]) - 1, iy1 = f.cell_y(inj.max[1]) + 1;
        auto inside = [&](Column c) { return inj.contains(cx(c.first), cy(c.second)); };
        switch (inj.kind) {
            case DefectKind::RemovePolygons:
                for (std::int32_t y = iy0; y <= iy1; ++y)
                    for (std::int32_t x = ix0; x <= ix1; ++x)
                        if (inside({x, y})) layout.remove_cell({x, y});
                break;
            case DefectKind::PhantomPolygons:
                for (std::int32_t y = iy0; y <= iy1; ++y)
                    for (std::int32_t x = ix0; x <= ix1; ++x) {
                        if (!inside({x, y}) || layout.has_cell({x, y})) continue;
                        if (const auto* t = recon.grid.terrain_at(x, y)) layout.set_cell({x, y}, t->surface);
                    }
                for (std::int32_t y = iy0 - 1; y <= iy1; ++y)
                    for (std::int32_t x = ix0 - 1; x <= ix1; ++x) {
                        const Column a{x, y};
                        for (const Column& b : {Column{x + 1, y}, Column{x, y + 1}}) {
                            if ((inside(a) || inside(b)) && layout.has_cell(a) && layout.has_cell(b)) layout.link(a, b);
                        }
                    }
                break;
            case DefectKind::DisconnectIsland: {
                std::vector<std::pair<Column, Column>> cut;
                for (const auto& [a, b] : layout.links())
                    if (inside(a) != inside(b)) cut.emplace_back(a, b);
                for (const auto& [a, b] : cut) layout.unlink(a, b);
                break;
            }
            case DefectKind::ShrinkMesh: break;
        }
    }
    r.mesh = emit_reference_navmesh(layout);
    r.ground_truth = layout_ground_truth(layout, recon);
    return r;
}

std::vector<DefectInjection> resolve_defects(const WorldSpec& spec, const Reconstruction& recon) {
    std::vector<DefectInjection> out = spec.defects;
    const auto& rd = spec.random_defects;
    if (rd.count == 0) return out;
    const auto& f = recon.graph.frame();
    const double s = f.resolution;
    std::unordered_set<std::uint64_t> reachable;
    for (auto n : recon.reach.members) {
        const auto& v = recon.graph.voxel(n).index;
        reachable.insert(pack_column(v.x, v.y));
    }
    const Region extent{{spec.origin.x, spec.origin.y, 0.0}, {spec.origin.x + spec.extent_x, spec.origin.y + spec.extent_y, 1.0}};
    const auto cells = region_cells(f, extent);
    const auto& seed = recon.graph.voxel(recon.reach.seed).center;
    struct Placed {
        std::int32_t x0, y0, x1, y1;  // inclusive cell bounds
    };
    std::vector<Placed> placed;
    auto rng = stream(spec.seed, 4);
    for (std::size_t k = 0; k < rd.count; ++k) {
        bool ok = false;
        for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
            const auto side = static_cast<std::int32_t>(uniform_index(rng, rd.min_cells, rd.max_cells));
            if (cells.hi.x - cells.lo.x < side || cells.hi.y - cells.lo.y < side) break;
            const auto x0 = static_cast<std::int32_t>(uniform_index(rng, 0, cells.hi.x - cells.lo.x - side)) + cells.lo.x;
            const auto y0 = static_cast<std::int32_t>(uniform_index(rng, 0, cells.hi.y - cells.lo.y - side)) + cells.lo.y;
            const DefectKind kind = rd.kinds[uniform_index(rng, 0, rd.kinds.size() - 1)];
            const Placed p{x0, y0, x0 + side - 1, y0 + side - 1};
            const double wx0 = f.origin.x + x0 * s, wy0 = f.origin.y + y0 * s;
            const double wx1 = f.origin.x + (p.x1 + 1) * s, wy1 = f.origin.y + (p.y1 + 1) * s;
            if (rect_distance(seed.x, seed.y, wx0, wy0, wx1, wy1) < rd.seed_clearance) continue;
            const auto gap = static_cast<std::int32_t>(rd.gap_cells);
            if (std::any_of(placed.begin(), placed.end(), [&](const Placed& q) {
                    return p.x0 <= q.x1 + gap && q.x0 <= p.x1 + gap && p.y0 <= q.y1 + gap && q.y0 <= p.y1 + gap;
                }))
                continue;
            bool covered = true;
            for (std::int32_t y = p.y0; y <= p.y1 && covered; ++y)
                for (std::int32_t x = p.x0; x <= p.x1 && covered; ++x) covered = reachable.contains(pack_column(x, y));
            if (!covered) continue;
            placed.push_back(p);
            DefectInjection inj;
            inj.kind = kind;
            inj.min = {wx0, wy0};
            inj.max = {wx1, wy1};
            out.push_back(inj);
            ok = true;
        }
        if (!ok) throw Error("could not place random defect " + std::to_string(k + 1) + " of " + std::to_string(rd.count));
    }
    return out;
}

Fixture build_fixture(const WorldSpec& spec) {
    Fixture fx;
    fx.world = generate_world(spec);
    fx.recon = reconstruct(fx.world.hf, fx.world.meshes, fx.world.region, fx.world.seed, reconstruct_options(fx.world.spec));
    fx.defects = resolve_defects(fx.world.spec, fx.recon);
    fx.injection = inject_defects(layout_from_graph(fx.recon.graph), fx.defects, fx.recon, fx.world.spec);
    return fx;
}

void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << text;
    };
    save_heightfield(fx.world.hf, dir / "terrain.hf");
    save_mesh(fx.world.meshes[0], dir / "obstacles.obj");
    json files{{"heightfield", "terrain.hf"}, {"meshes", {"obstacles.obj"}}, {"markers", "markers.json"},
               {"navmesh", "navmesh.nm"},     {"reference_navmesh", "reference.nm"}, {"ground_truth", "ground_truth.json"}};
    if (!fx.world.meshes[1].triangles.empty()) {
        save_mesh(fx.world.meshes[1], dir / "props.obj");
        files["meshes"].push_back("props.obj");
    }
    write_text("markers.json", format_markers(fx.world.markers));
    save_navmesh(fx.injection.mesh, dir / "navmesh.nm");
    save_navmesh(emit_reference_navmesh(fx.recon.graph), dir / "reference.nm");

    json gt{{"format", "navvox-ground-truth/1"}, {"injections", json::array()}, {"voxels", json::array()}};
    for (const auto& d : fx.defects) {
        json dj{{"kind", to_string(d.kind)}};
        if (d.kind == DefectKind::ShrinkMesh) {
            dj["margin"] = d.margin;
        } else {
            dj["min"] = {d.min[0], d.min[1]};
            dj["max"] = {d.max[0], d.max[1]};
        }
        gt["injections"].push_back(dj);
    }
    for (auto n : fx.injection.ground_truth) {
        const auto& v = fx.recon.graph.voxel(n);
        gt["voxels"].push_back({{"voxel", {v.index.x, v.index.y, v.index.z}},
                                {"position", xyz(v.center)},
                                {"kind", fx.recon.reach.contains(n) ? "missing_navmesh" : "phantom_navmesh"}});
    }
    write_text("ground_truth.json", gt.dump(2) + "\n");

    json world{{"format", "navvox-world/1"},
               {"spec", to_json(fx.world.spec)},
               {"seed", xyz(fx.world.seed)},
               {"region", {{"min", xyz(fx.world.region.min)}, {"max", xyz(fx.world.region.max)}}},
               {"files", files},
               {"summary",
                {{"walkable", fx.recon.graph.size()},
                 {"reachable", fx.recon.reach.size()},
                 {"ground_truth", fx.injection.ground_truth.size()},
                 {"navmesh_polygons", fx.injection.mesh.polygon_count()}}}};
    write_text("world.json", world.dump(2) + "\n");
}

WorldSpec corridor_world_spec(std::uint64_t seed) {
    WorldSpec s;
    s.seed = seed;
    s.extent_x = 16.0;
    s.extent_y = 10.0;
    s.seed_xy = std::array<double, 2>{2.0, 5.0};
    // Two walls leave a 4 m corridor between the west and east rooms.
    s.obstacles.boxes.push_back({{5.0, 0.0, -1.0}, {11.0, 3.0, 4.0}, false});
    s.obstacles.boxes.push_back({{5.0, 7.0, -1.0}, {11.0, 10.0, 4.0}, false});
    s.markers.clusters = 1;
    s.markers.per_cluster = 4;
    s.markers.spread = 1.5;
    s.markers.radius = 2.0;
    s.markers.kinds = {MarkerKind::InteractionZone};
    s.markers.centers = {{13.0, 5.0}};
    return s;
}

WorldSpec clustered_world_spec(std::uint64_t seed) {
    WorldSpec s;
    s.seed = seed;
    s.extent_x = 24.0;
    s.extent_y = 24.0;
    s.terrain.kind = TerrainKind::Noise;
    s.terrain.amplitude = 0.4;
    s.terrain.frequency = 0.05;
    s.terrain.octaves = 2;
    s.obstacles.count = 6;
    s.obstacles.min_size = 1.0;
    s.obstacles.max_size = 2.5;
    s.markers.clusters = 3;
    s.markers.per_cluster = 3;
    s.markers.spread = 2.0;
    s.markers.radius = 2.0;
    return s;
}

WorldSpec bench_world_spec(std::uint64_t seed) {
    WorldSpec s = clustered_world_spec(seed);
    s.random_defects.count = 3;
    return s;
}

}  // namespace navvox
