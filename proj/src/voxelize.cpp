#include <algorithm>

#include "navvox/geom.hpp"

namespace navvox {

VoxelSet voxelize_terrain(const HeightField& hf, const Region& region, double resolution) {
    VoxelSet out{GridFrame::for_region(region, resolution), {}};
    const GridFrame& f = out.frame;
    const IndexRange r = region_cells(f, region);
    for (std::int32_t ix = r.lo.x; ix < r.hi.x; ++ix) {
        for (std::int32_t iy = r.lo.y; iy < r.hi.y; ++iy) {
            const double x = f.origin.x + (ix + 0.5) * resolution;
            const double y = f.origin.y + (iy + 0.5) * resolution;
            if (!hf.contains(x, y)) continue;
            const double h = hf.sample(x, y);
            const VoxelIndex idx{ix, iy, f.cell_z(h)};
            out.voxels.push_back({idx, f.center(idx), VoxelKind::TerrainSurface, h});
        }
    }
    return out;
}

namespace {

// Projects the triangle onto `axis` and checks against the box radius.
bool separated_on(const Vec3& axis, const Vec3& v0, const Vec3& v1, const Vec3& v2, double h) {
    const double p0 = axis.dot(v0);
    const double p1 = axis.dot(v1);
    const double p2 = axis.dot(v2);
    const double r = h * (std::abs(axis.x) + std::abs(axis.y) + std::abs(axis.z));
    return std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r;
}

}  // namespace

bool triangle_box_overlap(const Vec3& box_center, double h, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 v0 = a - box_center;
    const Vec3 v1 = b - box_center;
    const Vec3 v2 = c - box_center;

    // Box face normals: plain AABB overlap of the triangle bounds.
    if (std::min({v0.x, v1.x, v2.x}) > h || std::max({v0.x, v1.x, v2.x}) < -h) return false;
    if (std::min({v0.y, v1.y, v2.y}) > h || std::max({v0.y, v1.y, v2.y}) < -h) return false;
    if (std::min({v0.z, v1.z, v2.z}) > h || std::max({v0.z, v1.z, v2.z}) < -h) return false;

    const Vec3 e0 = v1 - v0;
    const Vec3 e1 = v2 - v1;
    const Vec3 e2 = v0 - v2;

    const Vec3 n = e0.cross(e1);
    const double d = n.dot(v0);
    const double r = h * (std::abs(n.x) + std::abs(n.y) + std::abs(n.z));
    if (d > r || d < -r) return false;

    static constexpr Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& u : axes) {
        for (const Vec3* e : {&e0, &e1, &e2}) {
            if (separated_on(u.cross(*e), v0, v1, v2, h)) return false;
        }
    }
    return true;
}

namespace {

struct TriangleRef {
    const CollisionMesh* mesh;
    std::uint32_t tri;
};

std::vector<TriangleRef> included_triangles(std::span<const CollisionMesh> meshes) {
    std::vector<TriangleRef> tris;
    for (const auto& m : meshes) {
        if (m.nav_excluded) continue;
        for (std::uint32_t t = 0; t < m.triangles.size(); ++t) tris.push_back({&m, t});
    }
    return tris;
}

// Candidate cells come from the triangle bounds padded by one cell; the
// overlap test decides, so the padding only costs a few extra tests.
void voxelize_triangle(const TriangleRef& ref, const GridFrame& f, const IndexRange& range, std::vector<VoxelIndex>& out) {
    const auto& t = ref.mesh->triangles[ref.tri];
    const Vec3& a = ref.mesh->vertices[t[0]];
    const Vec3& b = ref.mesh->vertices[t[1]];
    const Vec3& c = ref.mesh->vertices[t[2]];
    const VoxelIndex lo{std::max(range.lo.x, f.cell_x(std::min({a.x, b.x, c.x})) - 1),
                        std::max(range.lo.y, f.cell_y(std::min({a.y, b.y, c.y})) - 1),
                        std::max(range.lo.z, f.cell_z(std::min({a.z, b.z, c.z})) - 1)};
    const VoxelIndex hi{std::min(range.hi.x - 1, f.cell_x(std::max({a.x, b.x, c.x})) + 1),
                        std::min(range.hi.y - 1, f.cell_y(std::max({a.y, b.y, c.y})) + 1),
                        std::min(range.hi.z - 1, f.cell_z(std::max({a.z, b.z, c.z})) + 1)};
    const double h = 0.5 * f.resolution;
    for (std::int32_t x = lo.x; x <= hi.x; ++x) {
        for (std::int32_t y = lo.y; y <= hi.y; ++y) {
            for (std::int32_t z = lo.z; z <= hi.z; ++z) {
                const VoxelIndex idx{x, y, z};
                if (triangle_box_overlap(f.center(idx), h, a, b, c)) out.push_back(idx);
            }
        }
    }
}

VoxelSet finish(const GridFrame& f, std::vector<VoxelIndex>& cells) {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    VoxelSet out{f, {}};
    out.voxels.reserve(cells.size());
    for (const auto& idx : cells) out.voxels.push_back({idx, f.center(idx), VoxelKind::Occupied, 0.0});
    return out;
}

}  // namespace

VoxelSet voxelize_collision(std::span<const CollisionMesh> meshes, const Region& region, double resolution) {
    const GridFrame f = GridFrame::for_region(region, resolution);
    const IndexRange range = region_cells(f, region);
    const auto tris = included_triangles(meshes);
    std::vector<VoxelIndex> cells;

#pragma omp parallel
    {
        std::vector<VoxelIndex> local;
#pragma omp for schedule(dynamic, 32) nowait
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(tris.size()); ++i) {
            voxelize_triangle(tris[static_cast<std::size_t>(i)], f, range, local);
        }
#pragma omp critical(navvox_voxelize_merge)
        cells.insert(cells.end(), local.begin(), local.end());
    }
    return finish(f, cells);
}

VoxelSet voxelize_collision_serial(std::span<const CollisionMesh> meshes, const Region& region, double resolution) {
    const GridFrame f = GridFrame::for_region(region, resolution);
    const IndexRange range = region_cells(f, region);
    std::vector<VoxelIndex> cells;
    for (const auto& ref : included_triangles(meshes)) voxelize_triangle(ref, f, range, cells);
    return finish(f, cells);
}

}  // namespace navvox
