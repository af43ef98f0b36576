#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navvox/explore.hpp"
#include "navvox/navmesh.hpp"
#include "navvox/walk.hpp"

namespace navvox {

enum class InconsistencyKind : std::uint8_t {
    MissingNavmesh,  // reachable in the voxel model, not on the navmesh
    PhantomNavmesh,  // navmesh-reachable, not reachable in the voxel model
};

std::string to_string(InconsistencyKind kind);

struct Inconsistency {
    std::uint32_t node = 0;
    VoxelIndex voxel;
    Vec3 position;
    InconsistencyKind kind = InconsistencyKind::MissingNavmesh;
    /// Missing: horizontal distance to the nearest polygon of the seed's navmesh
    /// component. Phantom: horizontal distance to the nearest reachable voxel footprint.
    double boundary_distance = 0.0;
};

/// Compares voxel reachability with navmesh reachability for walk-graph nodes.
class WaypointChecker {
public:
    WaypointChecker(const WalkGraph& graph, const ReachableSet& reach, const NavReachability& nav);

    std::optional<Inconsistency> check(std::uint32_t node) const;

    const WalkGraph& graph() const { return *graph_; }
    const ReachableSet& reach() const { return *reach_; }
    const NavReachability& nav() const { return *nav_; }

private:
    double distance_to_reachable(const Vec3& p) const;

    const WalkGraph* graph_;
    const ReachableSet* reach_;
    const NavReachability* nav_;
    KdTree<2> reach_index_;
    std::vector<std::uint32_t> reach_nodes_;
};

inline std::optional<Inconsistency> check_waypoint(const WaypointChecker& checker, std::uint32_t node) {
    return checker.check(node);
}

/// Checks every node; mismatches are returned in input order. Parallel over nodes.
std::vector<Inconsistency> check_waypoints(const WaypointChecker& checker, std::span<const std::uint32_t> nodes);
/// Single-threaded reference for check_waypoints.
std::vector<Inconsistency> check_waypoints_serial(const WaypointChecker& checker, std::span<const std::uint32_t> nodes);

/// Drops items whose boundary distance is at most epsilon; epsilon = 0 keeps everything.
std::vector<Inconsistency> tolerance_filter(std::span<const Inconsistency> raw, double epsilon);

struct DefectCluster {
    std::uint32_t id = 0;
    std::vector<std::size_t> members;  // indices into the filtered list, ascending
    Vec3 centroid;
    Aabb extent;

    std::size_t size() const { return members.size(); }
};

/// Connected components of the filtered items, two items being linked when
/// their horizontal center distance is at most `radius`. Components smaller
/// than tau are dropped; the rest are sorted by size (descending), then
/// centroid (lexicographic), and numbered in that order.
std::vector<DefectCluster> cluster_defects(std::span<const Inconsistency> filtered, std::size_t tau, double radius);

struct ValidationConfig {
    double epsilon = 0.5;
    std::size_t tau = 3;
    Strategy strategy = Strategy::BFS;
    std::size_t budget = 0;  // samples per episode; 0 = exhaustive
    std::size_t episodes = 1;
    std::uint64_t seed = 0;
    double rl_epsilon = 0.05;
    std::size_t heuristic_horizon = 30;
    RewardParams reward;
    bool island_sweep = true;
    std::size_t exhaustive_step_factor = 20;

    void validate() const;
};

struct ValidationInputs {
    const WalkGraph* graph = nullptr;
    const ReachableSet* reach = nullptr;
    const NavMesh* mesh = nullptr;
    NavQueryConfig nav;
    const ImportanceField* field = nullptr;  // over the walk graph; restricted to the reachable set internally
    double importance_scale = 1.0;
    const QNetwork* policy = nullptr;
};

struct ValidationMetrics {
    std::size_t walkable = 0;
    std::size_t reachable = 0;
    std::size_t samples = 0;           // exploration samples including revisits and exhaustive completion
    std::size_t unique_waypoints = 0;  // distinct reachable voxels checked
    std::size_t island_checks = 0;     // walkable voxels outside the reachable set checked by the sweep
    std::size_t missing_raw = 0;
    std::size_t phantom_raw = 0;
    std::size_t missing_filtered = 0;
    std::size_t phantom_filtered = 0;
    double coverage = 0.0;
};

struct DefectReport {
    std::vector<Inconsistency> raw;
    std::vector<Inconsistency> filtered;
    std::vector<DefectCluster> clusters;
    std::vector<std::int64_t> cluster_of;  // per filtered item, -1 when pruned
    std::vector<Trajectory> trajectories;
    std::vector<std::uint8_t> visited;     // per node, reachable voxels sampled by exploration
    ValidationMetrics metrics;
    std::uint32_t seed_polygon = 0;
};

/// Explores the reachable set with the configured strategy, checks the
/// deduplicated waypoints (plus every unreachable walkable voxel when the
/// island sweep is on), then filters and clusters the mismatches. Raw
/// mismatches are ordered by voxel index.
DefectReport run_validation(const ValidationInputs& in, const ValidationConfig& cfg);

/// Stable JSON report. `config_echo` is embedded verbatim.
nlohmann::json report_json(const DefectReport& report, const ValidationInputs& in, const ValidationConfig& cfg,
                           const nlohmann::json& config_echo);

}  // namespace navvox
