#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "navvox/core.hpp"
#include "navvox/kdtree.hpp"

namespace navvox {

/// Regular terrain height samples. Sample (i, j) sits at
/// origin + (i * cell_size, j * cell_size) with world height origin.z + heights[j * width + i].
struct HeightField {
    Vec3 origin;
    double cell_size = 1.0;
    int width = 0;
    int depth = 0;
    std::vector<double> heights;

    double at(int i, int j) const { return origin.z + heights[static_cast<std::size_t>(j) * width + i]; }
    double max_x() const { return origin.x + (width - 1) * cell_size; }
    double max_y() const { return origin.y + (depth - 1) * cell_size; }
    bool contains(double x, double y) const {
        return x >= origin.x && x <= max_x() && y >= origin.y && y <= max_y();
    }

    /// Bilinear height at (x, y). Throws navvox::Error outside the footprint.
    double sample(double x, double y) const;

    /// Checks dimensions and finiteness; throws navvox::Error on violation.
    void validate() const;
};

HeightField parse_heightfield(std::istream& in, const std::string& source = "<stream>");
HeightField load_heightfield(const std::filesystem::path& path);
std::string format_heightfield(const HeightField& hf);
void save_heightfield(const HeightField& hf, const std::filesystem::path& path);

struct CollisionMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    bool nav_excluded = false;
};

/// Removes triangles with area below 1e-12 m^2. Returns the number removed.
std::size_t drop_degenerate_triangles(CollisionMesh& mesh);

/// Parses the OBJ subset (`v`, `f`, `# navvox: nav_excluded`). Degenerate
/// triangles are dropped and counted in `dropped` when non-null.
CollisionMesh parse_mesh(std::istream& in, const std::string& source = "<stream>", std::size_t* dropped = nullptr);
CollisionMesh load_mesh(const std::filesystem::path& path, std::size_t* dropped = nullptr);
std::string format_mesh(const CollisionMesh& mesh);
void save_mesh(const CollisionMesh& mesh, const std::filesystem::path& path);

/// Axis-aligned validation region.
struct Region {
    Vec3 min;
    Vec3 max;

    static Region around(const Vec3& seed, double half_extent);
    static Region from_corners(const Vec3& a, const Vec3& b);
};

/// Maps integer voxel indices to world space. The origin is snapped to a
/// multiple of the resolution so voxel boxes line up across regions.
struct GridFrame {
    Vec3 origin;
    double resolution = 0.5;

    static GridFrame for_region(const Region& region, double resolution);

    Vec3 center(const VoxelIndex& v) const {
        return {origin.x + (v.x + 0.5) * resolution, origin.y + (v.y + 0.5) * resolution,
                origin.z + (v.z + 0.5) * resolution};
    }
    Aabb box(const VoxelIndex& v) const {
        return {{origin.x + v.x * resolution, origin.y + v.y * resolution, origin.z + v.z * resolution},
                {origin.x + (v.x + 1) * resolution, origin.y + (v.y + 1) * resolution, origin.z + (v.z + 1) * resolution}};
    }
    std::int32_t cell_x(double x) const { return static_cast<std::int32_t>(std::floor((x - origin.x) / resolution)); }
    std::int32_t cell_y(double y) const { return static_cast<std::int32_t>(std::floor((y - origin.y) / resolution)); }
    std::int32_t cell_z(double z) const { return static_cast<std::int32_t>(std::floor((z - origin.z) / resolution)); }

    bool operator==(const GridFrame&) const = default;
};

/// Inclusive-exclusive index ranges of voxels whose centers lie in a region.
struct IndexRange {
    VoxelIndex lo;
    VoxelIndex hi;  // exclusive
};
IndexRange region_cells(const GridFrame& frame, const Region& region);

enum class VoxelKind : std::uint8_t { TerrainSurface, Occupied };

struct Voxel {
    VoxelIndex index;
    Vec3 center;
    VoxelKind kind = VoxelKind::TerrainSurface;
    double surface = 0.0;  // sampled terrain height for TerrainSurface voxels

    bool operator==(const Voxel&) const = default;
};

/// Voxels produced against one frame, sorted by index, no duplicates.
struct VoxelSet {
    GridFrame frame;
    std::vector<Voxel> voxels;
};

/// One surface voxel per (x, y) cell of the region inside the heightfield footprint.
VoxelSet voxelize_terrain(const HeightField& hf, const Region& region, double resolution);

/// Closed-box triangle/AABB overlap (separating axis test).
bool triangle_box_overlap(const Vec3& box_center, double half_size, const Vec3& a, const Vec3& b, const Vec3& c);

/// Voxels of the region whose boxes touch a triangle of any mesh not marked nav_excluded.
/// Triangles are partitioned across OpenMP threads; the merge is sorted, so
/// the result does not depend on the thread count.
VoxelSet voxelize_collision(std::span<const CollisionMesh> meshes, const Region& region, double resolution);

/// Single-threaded reference for voxelize_collision.
VoxelSet voxelize_collision_serial(std::span<const CollisionMesh> meshes, const Region& region, double resolution);

/// Immutable union of terrain and occupancy voxels with a nearest-neighbor index.
class VoxelGrid {
public:
    VoxelGrid() = default;

    const GridFrame& frame() const { return frame_; }
    double resolution() const { return frame_.resolution; }
    const std::vector<Voxel>& terrain() const { return terrain_; }
    const std::vector<Voxel>& occupied() const { return occupied_; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    bool is_occupied(const VoxelIndex& v) const { return occupied_keys_.contains(pack(v)); }
    /// Terrain surface voxel of column (x, y), or nullptr.
    const Voxel* terrain_at(std::int32_t x, std::int32_t y) const;
    /// Occupied z-indices in column (x, y), ascending; empty when none.
    std::span<const std::int32_t> occupied_column(std::int32_t x, std::int32_t y) const;

    /// Unique cells (terrain first when a cell is both), sorted by index.
    const std::vector<Voxel>& cells() const { return cells_; }

    /// Nearest cell center to p; ties go to the lexicographically lowest index.
    const Voxel& nearest(const Vec3& p) const;

private:
    friend VoxelGrid build_grid(VoxelSet terrain, VoxelSet occupied);

    GridFrame frame_;
    std::vector<Voxel> terrain_;
    std::vector<Voxel> occupied_;
    std::vector<Voxel> cells_;
    std::unordered_set<std::uint64_t> occupied_keys_;
    std::unordered_map<std::uint64_t, std::uint32_t> terrain_column_;
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> occupied_columns_;
    KdTree<3> index_;
};

/// Throws navvox::Error when the two sets were built on different frames.
VoxelGrid build_grid(VoxelSet terrain, VoxelSet occupied);

/// Throws navvox::Error on an empty grid.
Voxel nearest_voxel(const VoxelGrid& grid, const Vec3& p);

}  // namespace navvox
