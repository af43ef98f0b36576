#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navvox/core.hpp"

namespace navvox {

/// Snap tolerances standing in for engine-level navigation queries.
struct NavQueryConfig {
    double proj_radius = 0.125;  // max horizontal snap distance to a polygon footprint
    double height_tol = 0.4;     // max vertical distance to the polygon plane

    /// Defaults tied to the voxel resolution and agent step height.
    static NavQueryConfig defaults(double resolution, double step_height) { return {0.25 * resolution, step_height}; }
    void validate() const;
};

/// Convex-polygon navigation mesh with shared-edge adjacency.
///
/// Polygons are CCW seen from above and planar within 1e-4 m. Two polygons are
/// adjacent when they share an edge (same two vertex ids); an edge used by more
/// than two polygons is rejected as non-manifold. Connected components of the
/// adjacency graph are labelled once at construction.
class NavMesh {
public:
    static constexpr double kPlanarityTolerance = 1e-4;

    NavMesh() = default;

    /// Validates and indexes the polygons. Throws navvox::Error on invalid input.
    static NavMesh from_polygons(std::vector<Vec3> vertices, std::vector<std::vector<std::uint32_t>> polygons);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<std::vector<std::uint32_t>>& polygons() const { return polygons_; }
    std::size_t polygon_count() const { return polygons_.size(); }
    std::span<const std::uint32_t> adjacency(std::uint32_t poly) const { return adjacency_[poly]; }
    std::uint32_t component(std::uint32_t poly) const { return component_[poly]; }
    std::uint32_t component_count() const { return component_count_; }

    /// Height of the polygon's plane at (x, y).
    double height_at(std::uint32_t poly, double x, double y) const;
    /// Horizontal distance from (x, y) to the polygon footprint; 0 inside or on the boundary.
    double footprint_distance(std::uint32_t poly, double x, double y) const;
    /// Polygons whose footprint bounds come within `radius` of (x, y), unsorted.
    void candidates(double x, double y, double radius, std::vector<std::uint32_t>& out) const;
    /// Smallest footprint distance from (x, y) to a polygon of `component`; +inf when it has none.
    double distance_to_component(double x, double y, std::uint32_t component) const;

private:
    struct Plane {
        Vec3 normal;
        double offset = 0.0;
    };

    void build_buckets();

    std::vector<Vec3> vertices_;
    std::vector<std::vector<std::uint32_t>> polygons_;
    std::vector<std::vector<std::uint32_t>> adjacency_;
    std::vector<std::uint32_t> component_;
    std::uint32_t component_count_ = 0;
    std::vector<Plane> planes_;
    std::vector<Aabb> bounds_;

    double bucket_size_ = 1.0;
    double bucket_x0_ = 0.0;
    double bucket_y0_ = 0.0;
    std::int64_t bucket_nx_ = 0;
    std::int64_t bucket_ny_ = 0;
    std::vector<std::vector<std::uint32_t>> buckets_;
};

NavMesh parse_navmesh(std::istream& in, const std::string& source = "<stream>");
NavMesh load_navmesh(const std::filesystem::path& path);
std::string format_navmesh(const NavMesh& mesh);
void save_navmesh(const NavMesh& mesh, const std::filesystem::path& path);

/// Polygon under p: footprint within proj_radius horizontally and plane within
/// height_tol vertically; smallest vertical distance wins, then lowest id.
std::optional<std::uint32_t> project_point(const NavMesh& mesh, const Vec3& p, const NavQueryConfig& cfg);

/// True iff both points project and land in the same polygon component.
/// Throws navvox::Error when the seed is off-mesh.
bool nav_reachable(const NavMesh& mesh, const Vec3& seed, const Vec3& query, const NavQueryConfig& cfg);

/// Reachability queries against one fixed seed.
class NavReachability {
public:
    /// Throws navvox::Error when the seed is off-mesh.
    NavReachability(const NavMesh& mesh, const Vec3& seed, const NavQueryConfig& cfg);

    bool reachable(const Vec3& query) const;
    std::uint32_t seed_polygon() const { return seed_polygon_; }
    std::uint32_t seed_component() const { return mesh_->component(seed_polygon_); }
    const NavMesh& mesh() const { return *mesh_; }
    const NavQueryConfig& config() const { return cfg_; }

private:
    const NavMesh* mesh_;
    NavQueryConfig cfg_;
    std::uint32_t seed_polygon_ = 0;
};

}  // namespace navvox
