#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navvox/geom.hpp"
#include "navvox/importance.hpp"
#include "navvox/navmesh.hpp"
#include "navvox/pipeline.hpp"
#include "navvox/walk.hpp"

namespace navvox {

enum class TerrainKind : std::uint8_t { Flat, Ramp, Noise, Staircase };

std::string to_string(TerrainKind kind);

/// One plane-wave term of the noise profile:
/// amplitude * sin(wavenumber * (cos(direction) x + sin(direction) y) + phase).
struct NoiseWave {
    double amplitude = 0.0;
    double wavenumber = 0.0;
    double direction = 0.0;
    double phase = 0.0;
};

/// Square plateau added on top of the base profile.
struct Mesa {
    double center_x = 0.0;  // relative to the world origin
    double center_y = 0.0;
    double half_size = 4.0;
    double height = 3.0;
};

/// Terrain height relative to the world origin. Coordinates are local
/// (x - origin.x, y - origin.y).
struct TerrainProfile {
    TerrainKind kind = TerrainKind::Flat;
    double base = 0.0;
    double slope = 0.5;        // ramp: dh/dx
    double amplitude = 0.8;    // noise
    double frequency = 0.08;   // noise, cycles per metre of the first octave
    int octaves = 3;
    double riser = 0.3;        // staircase along +x
    double tread = 1.0;
    std::vector<Mesa> mesas;
    std::vector<NoiseWave> waves;  // filled from the world seed for noise terrain

    double height(double x, double y) const;
    /// Analytic (dh/dx, dh/dy); the staircase and mesa edges are treated as flat.
    std::array<double, 2> gradient(double x, double y) const;
};

struct BoxSpec {
    Vec3 min;
    Vec3 max;
    bool nav_excluded = false;
};

struct ObstacleSpec {
    std::size_t count = 0;
    double min_size = 1.0;
    double max_size = 3.0;
    double min_height = 2.5;
    double max_height = 4.0;
    double seed_clearance = 4.0;     // random boxes keep this horizontal distance from the seed
    std::size_t excluded_props = 0;  // random small boxes flagged nav_excluded
    std::vector<BoxSpec> boxes;      // explicit boxes in world coordinates
};

struct MarkerSpec {
    std::size_t clusters = 0;
    std::size_t per_cluster = 4;
    double spread = 3.0;
    double radius = 3.0;
    double height_offset = 1.0;
    std::vector<MarkerKind> kinds{MarkerKind::InteractionZone, MarkerKind::SpawnPoint, MarkerKind::PatrolPath};
    std::vector<std::array<double, 2>> centers;  // explicit cluster centers (world x, y); random otherwise
    std::map<std::string, double> weights;       // per-kind weight overrides
};

enum class DefectKind : std::uint8_t { RemovePolygons, ShrinkMesh, PhantomPolygons, DisconnectIsland };

std::string to_string(DefectKind kind);
DefectKind parse_defect_kind(const std::string& text);

/// Region is a horizontal rectangle [min, max) in world coordinates; a cell
/// is affected when its center lies inside. ShrinkMesh ignores the region.
struct DefectInjection {
    DefectKind kind = DefectKind::RemovePolygons;
    std::array<double, 2> min{0.0, 0.0};
    std::array<double, 2> max{0.0, 0.0};
    double margin = 0.0;

    bool contains(double x, double y) const { return x >= min[0] && x < max[0] && y >= min[1] && y < max[1]; }
};

/// Randomly placed square injections over fully reachable ground.
struct RandomDefectSpec {
    std::size_t count = 0;
    std::size_t min_cells = 5;  // side length in voxels
    std::size_t max_cells = 8;
    double seed_clearance = 6.0;
    std::size_t gap_cells = 3;
    std::vector<DefectKind> kinds{DefectKind::RemovePolygons, DefectKind::DisconnectIsland};
};

struct WorldSpec {
    std::uint64_t seed = 1;
    Vec3 origin;
    double extent_x = 32.0;
    double extent_y = 32.0;
    double hf_cell_size = 0.5;
    double resolution = 0.5;
    AgentParams agent;
    std::optional<std::array<double, 2>> seed_xy;  // default: extent center
    TerrainProfile terrain;
    ObstacleSpec obstacles;
    MarkerSpec markers;
    std::vector<DefectInjection> defects;
    RandomDefectSpec random_defects;

    void validate() const;
};

WorldSpec parse_world_spec(const nlohmann::json& j);
WorldSpec load_world_spec(const std::filesystem::path& path);
nlohmann::json to_json(const WorldSpec& spec);

struct World {
    WorldSpec spec;  // with noise waves resolved
    HeightField hf;
    std::vector<CollisionMesh> meshes;  // [obstacles, props]; either may be empty
    std::vector<GameplayMarker> markers;
    Region region;
    Vec3 seed;
};

World generate_world(const WorldSpec& spec);
ReconstructOptions reconstruct_options(const WorldSpec& spec);

/// Cell-level description of a navmesh on the voxel grid: which columns carry
/// a polygon (at what height) and which orthogonal neighbours are linked.
class ReferenceLayout {
public:
    using Column = std::pair<std::int32_t, std::int32_t>;

    ReferenceLayout() = default;
    explicit ReferenceLayout(GridFrame frame) : frame_(frame) {}

    const GridFrame& frame() const { return frame_; }
    const std::map<Column, double>& cells() const { return cells_; }
    const std::set<std::pair<Column, Column>>& links() const { return links_; }
    bool has_cell(Column c) const { return cells_.contains(c); }
    bool linked(Column a, Column b) const;

    void set_cell(Column c, double height) { cells_[c] = height; }
    void remove_cell(Column c);
    void link(Column a, Column b);
    void unlink(Column a, Column b);

    /// Component label per cell under the link relation (labels in cell order).
    std::map<Column, std::uint32_t> components() const;

private:
    GridFrame frame_;
    std::map<Column, double> cells_;
    std::set<std::pair<Column, Column>> links_;  // ordered pair, first < second
};

/// One cell per walkable voxel at its surface height; links for orthogonal graph edges.
ReferenceLayout layout_from_graph(const WalkGraph& graph);

/// Polygons for a layout: flat linked cells merge into rectangles, other cells
/// become a four-triangle fan. Polygon adjacency reproduces the link components.
NavMesh emit_reference_navmesh(const ReferenceLayout& layout);
inline NavMesh emit_reference_navmesh(const WalkGraph& graph) { return emit_reference_navmesh(layout_from_graph(graph)); }

struct InjectionResult {
    ReferenceLayout layout;
    NavMesh mesh;
    /// Walkable nodes whose navmesh reachability differs from voxel reachability, ascending.
    std::vector<std::uint32_t> ground_truth;
};

/// Applies the injections in order to the layout, re-emits the navmesh and
/// derives the ground truth. Throws navvox::Error when an injection touches
/// the seed cell or leaves the world extent.
InjectionResult inject_defects(const ReferenceLayout& base, std::span<const DefectInjection> injections,
                               const Reconstruction& recon, const WorldSpec& spec);

/// Ground truth of an arbitrary layout against the voxel reachable set.
std::vector<std::uint32_t> layout_ground_truth(const ReferenceLayout& layout, const Reconstruction& recon);

/// Explicit injections followed by randomly placed ones.
std::vector<DefectInjection> resolve_defects(const WorldSpec& spec, const Reconstruction& recon);

struct Fixture {
    World world;
    Reconstruction recon;
    std::vector<DefectInjection> defects;
    InjectionResult injection;
};

Fixture build_fixture(const WorldSpec& spec);

/// Writes terrain.hf, obstacles.obj, props.obj (when present), markers.json,
/// navmesh.nm, reference.nm, ground_truth.json and world.json.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

/// Flat world with two rooms joined by a corridor; the importance cluster is in the far room.
WorldSpec corridor_world_spec(std::uint64_t seed);
/// Gently rolling open world with a few obstacles and clustered markers.
WorldSpec clustered_world_spec(std::uint64_t seed);
/// The clustered world with three random navmesh defects; default benchmark fixture.
WorldSpec bench_world_spec(std::uint64_t seed);

}  // namespace navvox
