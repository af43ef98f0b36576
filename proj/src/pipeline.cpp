#include "navvox/pipeline.hpp"

namespace navvox {

Reconstruction reconstruct(const HeightField& hf, std::span<const CollisionMesh> meshes, const Region& region,
                           const Vec3& seed, const ReconstructOptions& opts) {
    opts.agent.validate();
    hf.validate();
    const double radius = opts.neighbor_radius > 0.0 ? opts.neighbor_radius : default_neighbor_radius(opts.resolution);
    if (radius < opts.resolution) throw Error("neighbor radius must be at least the voxel resolution");
    Reconstruction r;
    auto terrain = voxelize_terrain(hf, region, opts.resolution);
    if (terrain.voxels.empty()) throw Error("region does not overlap the heightfield");
    auto occupied = opts.serial ? voxelize_collision_serial(meshes, region, opts.resolution)
                                : voxelize_collision(meshes, region, opts.resolution);
    r.grid = build_grid(std::move(terrain), std::move(occupied));
    r.walkable = opts.serial ? classify_walkable_serial(r.grid, hf, opts.agent) : classify_walkable(r.grid, hf, opts.agent);
    if (r.walkable.empty()) throw Error("no walkable voxels in the region");
    r.graph = build_walk_graph(r.walkable, r.grid, opts.agent, radius);
    r.reach = flood_fill(r.graph, seed);
    return r;
}

}  // namespace navvox
