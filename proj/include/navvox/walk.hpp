#pragma once

#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "navvox/geom.hpp"

namespace navvox {

struct AgentParams {
    double max_slope = std::numbers::pi / 4.0;  // radians
    double step_height = 0.4;
    double radius = 0.5;
    double height = 2.0;

    void validate() const;
};

/// Upward unit normal of the heightfield at (x, y) from central differences
/// with a one-sample step. Throws navvox::Error when a stencil sample falls
/// outside the footprint.
Vec3 surface_normal(const HeightField& hf, double x, double y);

/// Slope angle (radians) used by the classifier. Near the footprint border the
/// stencil is clamped to one-sided differences instead of throwing.
double terrain_slope(const HeightField& hf, double x, double y);

/// Per-voxel predicates of the walkability test (slope, vertical clearance,
/// obstacle distance). The step test is pairwise and lives on graph edges.
struct WalkCheck {
    bool slope_ok = false;
    bool clearance_ok = false;
    bool obstacle_ok = false;

    bool walkable() const { return slope_ok && clearance_ok && obstacle_ok; }
};

WalkCheck check_walkable(const VoxelGrid& grid, const HeightField& hf, const AgentParams& params, const Voxel& terrain_voxel);

/// Indices of walkable terrain voxels, sorted. Evaluated per voxel in parallel.
std::vector<VoxelIndex> classify_walkable(const VoxelGrid& grid, const HeightField& hf, const AgentParams& params);

/// Single-threaded reference for classify_walkable.
std::vector<VoxelIndex> classify_walkable_serial(const VoxelGrid& grid, const HeightField& hf, const AgentParams& params);

inline double default_neighbor_radius(double resolution) { return 1.5 * resolution; }

/// Walkable-voxel adjacency graph. Node ids follow ascending voxel index, and
/// every adjacency list is sorted, so traversals are reproducible.
class WalkGraph {
public:
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    const GridFrame& frame() const { return frame_; }
    double radius() const { return radius_; }

    const Voxel& voxel(std::uint32_t node) const { return nodes_[node]; }
    const std::vector<Voxel>& voxels() const { return nodes_; }
    std::span<const std::uint32_t> neighbors(std::uint32_t node) const {
        return {neighbors_.data() + offsets_[node], neighbors_.data() + offsets_[node + 1]};
    }
    std::size_t edge_count() const { return neighbors_.size() / 2; }

    std::optional<std::uint32_t> node_at_column(std::int32_t x, std::int32_t y) const;
    std::optional<std::uint32_t> find(const VoxelIndex& v) const;

    /// Builds a graph from explicit nodes and symmetric adjacency (used by tests and generators).
    static WalkGraph from_adjacency(GridFrame frame, double radius, std::vector<Voxel> nodes,
                                    const std::vector<std::vector<std::uint32_t>>& adjacency);

private:
    friend WalkGraph build_walk_graph(std::span<const VoxelIndex>, const VoxelGrid&, const AgentParams&, double);

    GridFrame frame_;
    double radius_ = 0.0;
    std::vector<Voxel> nodes_;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> neighbors_;
    std::unordered_map<std::uint64_t, std::uint32_t> column_;
};

/// Connects walkable voxels whose centers are within `radius` horizontally and
/// whose surface heights differ by at most the step height. A diagonal edge
/// additionally needs one of the two shared orthogonal cells to connect to both
/// ends, so agents never pass through a zero-width corner.
WalkGraph build_walk_graph(std::span<const VoxelIndex> walkable, const VoxelGrid& grid, const AgentParams& params,
                           double radius);

struct ReachableSet {
    std::uint32_t seed = 0;
    std::vector<std::uint32_t> members;  // breadth-first order from the seed
    std::vector<std::uint8_t> mask;      // indexed by node id

    bool contains(std::uint32_t node) const { return node < mask.size() && mask[node] != 0; }
    std::size_t size() const { return members.size(); }
};

/// Walkable node nearest to p (3D center distance, lowest index on ties).
std::optional<std::uint32_t> nearest_node(const WalkGraph& graph, const Vec3& p);

/// Breadth-first component of the walkable voxel nearest to seed_pos.
/// Throws navvox::Error if no walkable voxel lies within twice the neighbor radius.
ReachableSet flood_fill(const WalkGraph& graph, const Vec3& seed_pos);
ReachableSet flood_fill_from(const WalkGraph& graph, std::uint32_t seed_node);

/// Writes walkable voxels and edge midpoints as `x y z kind` lines.
void dump_voxels(const std::filesystem::path& path, const WalkGraph& graph, const ReachableSet* reach = nullptr);

}  // namespace navvox
