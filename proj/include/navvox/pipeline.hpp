#pragma once

#include <span>
#include <vector>

#include "navvox/geom.hpp"
#include "navvox/walk.hpp"

namespace navvox {

/// Voxel reconstruction of one region: grid, walkable set, walk graph and the
/// component reachable from the seed.
struct Reconstruction {
    VoxelGrid grid;
    std::vector<VoxelIndex> walkable;
    WalkGraph graph;
    ReachableSet reach;
};

struct ReconstructOptions {
    double resolution = 0.5;
    AgentParams agent;
    double neighbor_radius = 0.0;  // 0 selects 1.5 * resolution
    bool serial = false;           // use the single-threaded kernels
};

Reconstruction reconstruct(const HeightField& hf, std::span<const CollisionMesh> meshes, const Region& region,
                           const Vec3& seed, const ReconstructOptions& opts);

}  // namespace navvox
