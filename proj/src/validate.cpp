#include "navvox/validate.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "navvox/rl.hpp"

namespace navvox {

std::string to_string(InconsistencyKind kind) {
    return kind == InconsistencyKind::MissingNavmesh ? "missing_navmesh" : "phantom_navmesh";
}

WaypointChecker::WaypointChecker(const WalkGraph& graph, const ReachableSet& reach, const NavReachability& nav)
    : graph_(&graph), reach_(&reach), nav_(&nav) {
    if (reach.mask.size() != graph.size()) throw Error("reachable set does not belong to this walk graph");
    std::vector<KdTree<2>::Point> pts;
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (!reach.contains(i)) continue;
        reach_nodes_.push_back(i);
        pts.push_back({graph.voxel(i).center.x, graph.voxel(i).center.y});
    }
    reach_index_ = KdTree<2>(pts);
}

double WaypointChecker::distance_to_reachable(const Vec3& p) const {
    const auto hit = reach_index_.nearest({p.x, p.y});
    if (!hit) return std::numeric_limits<double>::infinity();
    // The nearest footprint need not belong to the nearest center; every
    // footprint within reach lies within half a cell diagonal of that radius.
    const double h = 0.5 * graph_->frame().resolution;
    const double r = std::sqrt(hit->dist2) + h * std::numbers::sqrt2;
    std::vector<std::uint32_t> ids;
    reach_index_.within({p.x, p.y}, r, ids);
    double best = std::numeric_limits<double>::infinity();
    for (auto id : ids) {
        const Vec3& c = graph_->voxel(reach_nodes_[id]).center;
        best = std::min(best, std::hypot(std::max(std::abs(p.x - c.x) - h, 0.0), std::max(std::abs(p.y - c.y) - h, 0.0)));
    }
    return best;
}

std::optional<Inconsistency> WaypointChecker::check(std::uint32_t node) const {
    const Voxel& v = graph_->voxel(node);
    const bool r_vox = reach_->contains(node);
    const bool r_nav = nav_->reachable(v.center);
    if (r_vox == r_nav) return std::nullopt;
    Inconsistency out;
    out.node = node;
    out.voxel = v.index;
    out.position = v.center;
    if (r_vox) {
        out.kind = InconsistencyKind::MissingNavmesh;
        out.boundary_distance = nav_->mesh().distance_to_component(v.center.x, v.center.y, nav_->seed_component());
    } else {
        out.kind = InconsistencyKind::PhantomNavmesh;
        out.boundary_distance = distance_to_reachable(v.center);
    }
    return out;
}

std::vector<Inconsistency> check_waypoints(const WaypointChecker& checker, std::span<const std::uint32_t> nodes) {
    std::vector<std::optional<Inconsistency>> slots(nodes.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(nodes.size()); ++i) {
        slots[static_cast<std::size_t>(i)] = checker.check(nodes[static_cast<std::size_t>(i)]);
    }
    std::vector<Inconsistency> out;
    for (auto& s : slots) {
        if (s) out.push_back(*s);
    }
    return out;
}

std::vector<Inconsistency> check_waypoints_serial(const WaypointChecker& checker, std::span<const std::uint32_t> nodes) {
    std::vector<Inconsistency> out;
    for (auto n : nodes) {
        if (auto r = checker.check(n)) out.push_back(*r);
    }
    return out;
}

std::vector<Inconsistency> tolerance_filter(std::span<const Inconsistency> raw, double epsilon) {
    if (!(epsilon >= 0.0)) throw Error("tolerance epsilon must be >= 0");
    std::vector<Inconsistency> out;
    for (const auto& item : raw) {
        if (epsilon > 0.0 && item.boundary_distance <= epsilon) continue;
        out.push_back(item);
    }
    return out;
}

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<DefectCluster> cluster_defects(std::span<const Inconsistency> filtered, std::size_t tau, double radius) {
    if (tau < 1) throw Error("cluster size threshold tau must be >= 1");
    if (!(radius > 0.0)) throw Error("cluster radius must be positive");
    const std::size_t n = filtered.size();
    DisjointSets sets(n);
    // Bucket positions on a grid of cell size `radius`; linked items sit in the same or an adjacent bucket.
    auto key = [&](double x, double y) {
        return pack_column(static_cast<std::int32_t>(std::floor(x / radius)), static_cast<std::int32_t>(std::floor(y / radius)));
    };
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < n; ++i) buckets[key(filtered[i].position.x, filtered[i].position.y)].push_back(i);
    const double r2 = radius * radius * (1.0 + 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = filtered[i].position;
        const auto bx = static_cast<std::int32_t>(std::floor(p.x / radius));
        const auto by = static_cast<std::int32_t>(std::floor(p.y / radius));
        for (std::int32_t dx = -1; dx <= 1; ++dx) {
            for (std::int32_t dy = -1; dy <= 1; ++dy) {
                const auto it = buckets.find(pack_column(bx + dx, by + dy));
                if (it == buckets.end()) continue;
                for (std::size_t j : it->second) {
                    if (j <= i) continue;
                    const double ex = filtered[j].position.x - p.x;
                    const double ey = filtered[j].position.y - p.y;
                    if (ex * ex + ey * ey <= r2) sets.unite(i, j);
                }
            }
        }
    }

    std::unordered_map<std::size_t, std::size_t> slot;
    std::vector<DefectCluster> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        const auto root = sets.find(i);
        auto [it, fresh] = slot.emplace(root, clusters.size());
        if (fresh) clusters.emplace_back();
        clusters[it->second].members.push_back(i);
    }
    std::erase_if(clusters, [&](const DefectCluster& c) { return c.size() < tau; });
    for (auto& c : clusters) {
        Vec3 sum;
        c.extent = {filtered[c.members[0]].position, filtered[c.members[0]].position};
        for (auto m : c.members) {
            const Vec3& p = filtered[m].position;
            sum = sum + p;
            c.extent.min = {std::min(c.extent.min.x, p.x), std::min(c.extent.min.y, p.y), std::min(c.extent.min.z, p.z)};
            c.extent.max = {std::max(c.extent.max.x, p.x), std::max(c.extent.max.y, p.y), std::max(c.extent.max.z, p.z)};
        }
        c.centroid = sum * (1.0 / static_cast<double>(c.size()));
    }
    std::sort(clusters.begin(), clusters.end(), [](const DefectCluster& a, const DefectCluster& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return std::tie(a.centroid.x, a.centroid.y, a.centroid.z) < std::tie(b.centroid.x, b.centroid.y, b.centroid.z);
    });
    for (std::uint32_t k = 0; k < clusters.size(); ++k) clusters[k].id = k;
    return clusters;
}

void ValidationConfig::validate() const {
    if (!(epsilon >= 0.0)) throw Error("epsilon must be >= 0");
    if (tau < 1) throw Error("tau must be >= 1");
    if (episodes < 1) throw Error("at least one exploration episode is needed");
    if (exhaustive_step_factor < 1) throw Error("exhaustive step factor must be >= 1");
    reward.validate();
}

DefectReport run_validation(const ValidationInputs& in, const ValidationConfig& cfg) {
    cfg.validate();
    if (!in.graph || !in.reach || !in.mesh || !in.field) throw Error("validation inputs are incomplete");
    const WalkGraph& graph = *in.graph;
    const ReachableSet& reach = *in.reach;
    if (in.field->size() != graph.size()) throw Error("importance field does not match the walk graph");

    const NavReachability nav(*in.mesh, graph.voxel(reach.seed).center, in.nav);
    const WaypointChecker checker(graph, reach, nav);

    DefectReport rep;
    rep.seed_polygon = nav.seed_polygon();
    const bool exhaustive = cfg.budget == 0;
    const std::size_t budget = exhaustive ? cfg.exhaustive_step_factor * reach.size() + 1 : cfg.budget;

    ExploreEnv env(graph, in.field->restricted(reach.mask), reach.seed, cfg.reward, in.importance_scale);
    rep.visited.assign(graph.size(), 0);
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
        StrategyOptions opts;
        opts.budget = budget;
        opts.seed = cfg.seed;
        opts.episode = e;
        opts.policy = in.policy;
        opts.rl_epsilon = cfg.rl_epsilon;
        opts.heuristic_horizon = cfg.heuristic_horizon;
        opts.stop_when_all_visited = exhaustive;
        rep.trajectories.push_back(run_strategy(env, cfg.strategy, opts));
        for (auto n : rep.trajectories.back().nodes) rep.visited[n] = 1;
        rep.metrics.samples += rep.trajectories.back().samples();
    }
    if (exhaustive) {
        // Whatever the strategy left unvisited within its step cap is appended in breadth-first order.
        for (auto n : reach.members) {
            if (!rep.visited[n]) {
                rep.visited[n] = 1;
                ++rep.metrics.samples;
            }
        }
    }

    std::vector<std::uint32_t> waypoints;
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (rep.visited[i]) waypoints.push_back(i);
    }
    rep.metrics.unique_waypoints = waypoints.size();
    if (cfg.island_sweep) {
        for (std::uint32_t i = 0; i < graph.size(); ++i) {
            if (!reach.contains(i)) {
                waypoints.push_back(i);
                ++rep.metrics.island_checks;
            }
        }
    }
    rep.raw = check_waypoints(checker, waypoints);
    std::sort(rep.raw.begin(), rep.raw.end(), [](const Inconsistency& a, const Inconsistency& b) { return a.voxel < b.voxel; });
    rep.filtered = tolerance_filter(rep.raw, cfg.epsilon);
    rep.clusters = cluster_defects(rep.filtered, cfg.tau, graph.radius());
    rep.cluster_of.assign(rep.filtered.size(), -1);
    for (const auto& c : rep.clusters) {
        for (auto m : c.members) rep.cluster_of[m] = c.id;
    }

    auto& m = rep.metrics;
    m.walkable = graph.size();
    m.reachable = reach.size();
    for (const auto& r : rep.raw) (r.kind == InconsistencyKind::MissingNavmesh ? m.missing_raw : m.phantom_raw)++;
    for (const auto& r : rep.filtered) (r.kind == InconsistencyKind::MissingNavmesh ? m.missing_filtered : m.phantom_filtered)++;
    m.coverage = coverage(env.field(), rep.visited);
    return rep;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace

nlohmann::json report_json(const DefectReport& rep, const ValidationInputs& in, const ValidationConfig& cfg,
                           const nlohmann::json& config_echo) {
    nlohmann::json j;
    j["schema"] = "navvox-report/1";
    j["config"] = config_echo;
    j["validation"] = {{"epsilon", cfg.epsilon},
                       {"tau", cfg.tau},
                       {"strategy", to_string(cfg.strategy)},
                       {"budget", cfg.budget == 0 ? nlohmann::json("exhaustive") : nlohmann::json(cfg.budget)},
                       {"episodes", cfg.episodes},
                       {"seed", cfg.seed},
                       {"island_sweep", cfg.island_sweep},
                       {"lambda_step", cfg.reward.lambda_step},
                       {"p_revisit", cfg.reward.p_revisit},
                       {"neighbor_radius", in.graph->radius()},
                       {"resolution", in.graph->frame().resolution}};
    j["nav_query"] = {{"proj_radius", in.nav.proj_radius}, {"height_tol", in.nav.height_tol}, {"seed_polygon", rep.seed_polygon}};
    const auto& m = rep.metrics;
    j["metrics"] = {{"walkable_voxels", m.walkable},
                    {"reachable_voxels", m.reachable},
                    {"samples", m.samples},
                    {"unique_waypoints", m.unique_waypoints},
                    {"island_checks", m.island_checks},
                    {"coverage", m.coverage},
                    {"raw", {{"missing_navmesh", m.missing_raw}, {"phantom_navmesh", m.phantom_raw}}},
                    {"filtered", {{"missing_navmesh", m.missing_filtered}, {"phantom_navmesh", m.phantom_filtered}}},
                    {"clusters", rep.clusters.size()}};
    j["defects"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.filtered.size(); ++i) {
        const auto& d = rep.filtered[i];
        j["defects"].push_back({{"position", vec_json(d.position)},
                                {"voxel", {d.voxel.x, d.voxel.y, d.voxel.z}},
                                {"kind", to_string(d.kind)},
                                {"cluster_id", rep.cluster_of[i] < 0 ? nlohmann::json(nullptr) : nlohmann::json(rep.cluster_of[i])},
                                {"boundary_distance", d.boundary_distance}});
    }
    j["clusters"] = nlohmann::json::array();
    for (const auto& c : rep.clusters) {
        std::size_t missing = 0;
        for (auto k : c.members) missing += rep.filtered[k].kind == InconsistencyKind::MissingNavmesh;
        j["clusters"].push_back({{"id", c.id},
                                 {"size", c.size()},
                                 {"centroid", vec_json(c.centroid)},
                                 {"min", vec_json(c.extent.min)},
                                 {"max", vec_json(c.extent.max)},
                                 {"missing_navmesh", missing},
                                 {"phantom_navmesh", c.size() - missing}});
    }
    return j;
}

}  // namespace navvox
