#include "navvox/walk.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>

#include "text_io.hpp"

namespace navvox {

void AgentParams::validate() const {
    if (!(max_slope > 0.0 && max_slope < std::numbers::pi / 2.0)) throw Error("max slope must lie in (0, pi/2)");
    if (!(step_height > 0.0)) throw Error("step height must be positive");
    if (!(radius > 0.0)) throw Error("agent radius must be positive");
    if (!(height > 0.0)) throw Error("agent height must be positive");
}

namespace {

Vec3 normal_from_gradient(double dhdx, double dhdy) {
    const Vec3 n{-dhdx, -dhdy, 1.0};
    return n * (1.0 / n.norm());
}

}  // namespace

Vec3 surface_normal(const HeightField& hf, double x, double y) {
    const double c = hf.cell_size;
    if (x - c < hf.origin.x || x + c > hf.max_x() || y - c < hf.origin.y || y + c > hf.max_y()) {
        throw Error("surface normal stencil leaves the heightfield footprint");
    }
    const double dhdx = (hf.sample(x + c, y) - hf.sample(x - c, y)) / (2.0 * c);
    const double dhdy = (hf.sample(x, y + c) - hf.sample(x, y - c)) / (2.0 * c);
    return normal_from_gradient(dhdx, dhdy);
}

double terrain_slope(const HeightField& hf, double x, double y) {
    const double c = hf.cell_size;
    const double x0 = std::max(x - c, hf.origin.x);
    const double x1 = std::min(x + c, hf.max_x());
    const double y0 = std::max(y - c, hf.origin.y);
    const double y1 = std::min(y + c, hf.max_y());
    const double dhdx = (hf.sample(x1, y) - hf.sample(x0, y)) / (x1 - x0);
    const double dhdy = (hf.sample(x, y1) - hf.sample(x, y0)) / (y1 - y0);
    const Vec3 n = normal_from_gradient(dhdx, dhdy);
    return std::acos(std::clamp(n.z, -1.0, 1.0));
}

WalkCheck check_walkable(const VoxelGrid& grid, const HeightField& hf, const AgentParams& params, const Voxel& v) {
    WalkCheck out;
    const GridFrame& f = grid.frame();
    const double s = f.resolution;
    out.slope_ok = terrain_slope(hf, v.center.x, v.center.y) <= params.max_slope;

    // Vertical clearance: gap from the top of the surface voxel to the first
    // occupied voxel strictly above it in the same column.
    out.clearance_ok = true;
    for (std::int32_t z : grid.occupied_column(v.index.x, v.index.y)) {
        if (z > v.index.z) {
            out.clearance_ok = (z - v.index.z - 1) * s >= params.height;
            break;
        }
    }

    // Obstacle distance: horizontal center distance to occupied voxels that
    // intersect the agent body interval above step height.
    const double body_lo = v.surface + params.step_height;
    const double body_hi = v.surface + params.height;
    const auto reach = static_cast<std::int32_t>(std::ceil(params.radius / s));
    out.obstacle_ok = true;
    for (std::int32_t dx = -reach; dx <= reach && out.obstacle_ok; ++dx) {
        for (std::int32_t dy = -reach; dy <= reach && out.obstacle_ok; ++dy) {
            if (std::hypot(dx * s, dy * s) >= params.radius) continue;
            for (std::int32_t z : grid.occupied_column(v.index.x + dx, v.index.y + dy)) {
                const double lo = f.origin.z + z * s;
                if (lo >= body_hi) break;
                if (lo + s > body_lo) {
                    out.obstacle_ok = false;
                    break;
                }
            }
        }
    }
    return out;
}

std::vector<VoxelIndex> classify_walkable(const VoxelGrid& grid, const HeightField& hf, const AgentParams& params) {
    params.validate();
    const auto& terrain = grid.terrain();
    std::vector<std::uint8_t> keep(terrain.size(), 0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(terrain.size()); ++i) {
        keep[static_cast<std::size_t>(i)] = check_walkable(grid, hf, params, terrain[static_cast<std::size_t>(i)]).walkable();
    }
    std::vector<VoxelIndex> out;
    for (std::size_t i = 0; i < terrain.size(); ++i) {
        if (keep[i]) out.push_back(terrain[i].index);
    }
    return out;
}

std::vector<VoxelIndex> classify_walkable_serial(const VoxelGrid& grid, const HeightField& hf, const AgentParams& params) {
    params.validate();
    std::vector<VoxelIndex> out;
    for (const auto& v : grid.terrain()) {
        if (check_walkable(grid, hf, params, v).walkable()) out.push_back(v.index);
    }
    return out;
}

std::optional<std::uint32_t> WalkGraph::node_at_column(std::int32_t x, std::int32_t y) const {
    const auto it = column_.find(pack_column(x, y));
    if (it == column_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::uint32_t> WalkGraph::find(const VoxelIndex& v) const {
    auto n = node_at_column(v.x, v.y);
    if (n && nodes_[*n].index == v) return n;
    return std::nullopt;
}

WalkGraph WalkGraph::from_adjacency(GridFrame frame, double radius, std::vector<Voxel> nodes,
                                    const std::vector<std::vector<std::uint32_t>>& adjacency) {
    if (adjacency.size() != nodes.size()) throw Error("adjacency size does not match node count");
    WalkGraph g;
    g.frame_ = frame;
    g.radius_ = radius;
    g.nodes_ = std::move(nodes);
    for (std::uint32_t i = 0; i < g.nodes_.size(); ++i) {
        auto adj = adjacency[i];
        std::sort(adj.begin(), adj.end());
        g.neighbors_.insert(g.neighbors_.end(), adj.begin(), adj.end());
        g.offsets_.push_back(g.neighbors_.size());
        g.column_.emplace(pack_column(g.nodes_[i].index.x, g.nodes_[i].index.y), i);
    }
    return g;
}

WalkGraph build_walk_graph(std::span<const VoxelIndex> walkable, const VoxelGrid& grid, const AgentParams& params,
                           double radius) {
    WalkGraph g;
    g.frame_ = grid.frame();
    g.radius_ = radius;
    const double s = grid.resolution();

    for (const auto& idx : walkable) {
        const Voxel* v = grid.terrain_at(idx.x, idx.y);
        if (!v || v->index != idx) throw Error("walkable voxel is not a terrain surface voxel");
        g.nodes_.push_back(*v);
    }
    std::sort(g.nodes_.begin(), g.nodes_.end(), [](const Voxel& a, const Voxel& b) { return a.index < b.index; });
    for (std::uint32_t i = 0; i < g.nodes_.size(); ++i) {
        g.column_.emplace(pack_column(g.nodes_[i].index.x, g.nodes_[i].index.y), i);
    }

    auto step_ok = [&](std::uint32_t a, std::uint32_t b) {
        return std::abs(g.nodes_[a].surface - g.nodes_[b].surface) <= params.step_height;
    };

    // Offsets within the horizontal radius, with a small tolerance against
    // rounding in r = k * s.
    const auto reach = static_cast<std::int32_t>(std::floor(radius / s + 1e-9));
    std::vector<std::pair<std::int32_t, std::int32_t>> offsets;
    for (std::int32_t dx = -reach; dx <= reach; ++dx) {
        for (std::int32_t dy = -reach; dy <= reach; ++dy) {
            if ((dx || dy) && std::hypot(dx * s, dy * s) <= radius * (1.0 + 1e-12)) offsets.emplace_back(dx, dy);
        }
    }

    std::vector<std::uint32_t> adj;
    for (std::uint32_t i = 0; i < g.nodes_.size(); ++i) {
        const VoxelIndex& vi = g.nodes_[i].index;
        adj.clear();
        for (auto [dx, dy] : offsets) {
            const auto j = g.node_at_column(vi.x + dx, vi.y + dy);
            if (!j || !step_ok(i, *j)) continue;
            if (std::abs(dx) == 1 && std::abs(dy) == 1) {
                bool bridged = false;
                for (auto [mx, my] : {std::pair{dx, 0}, std::pair{0, dy}}) {
                    const auto m = g.node_at_column(vi.x + mx, vi.y + my);
                    if (m && step_ok(i, *m) && step_ok(*m, *j)) bridged = true;
                }
                if (!bridged) continue;
            }
            adj.push_back(*j);
        }
        std::sort(adj.begin(), adj.end());
        g.neighbors_.insert(g.neighbors_.end(), adj.begin(), adj.end());
        g.offsets_.push_back(g.neighbors_.size());
    }
    return g;
}

std::optional<std::uint32_t> nearest_node(const WalkGraph& graph, const Vec3& p) {
    std::optional<std::uint32_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        const double d = distance(graph.voxel(i).center, p);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

ReachableSet flood_fill_from(const WalkGraph& graph, std::uint32_t seed_node) {
    if (seed_node >= graph.size()) throw Error("flood fill seed is not a graph node");
    ReachableSet r;
    r.seed = seed_node;
    r.mask.assign(graph.size(), 0);
    std::deque<std::uint32_t> queue{seed_node};
    r.mask[seed_node] = 1;
    while (!queue.empty()) {
        const std::uint32_t u = queue.front();
        queue.pop_front();
        r.members.push_back(u);
        for (std::uint32_t w : graph.neighbors(u)) {
            if (!r.mask[w]) {
                r.mask[w] = 1;
                queue.push_back(w);
            }
        }
    }
    return r;
}

ReachableSet flood_fill(const WalkGraph& graph, const Vec3& seed_pos) {
    const auto seed = nearest_node(graph, seed_pos);
    if (!seed || distance(graph.voxel(*seed).center, seed_pos) > 2.0 * graph.radius()) {
        throw Error("no walkable voxel within 2r of the seed position");
    }
    return flood_fill_from(graph, *seed);
}

void dump_voxels(const std::filesystem::path& path, const WalkGraph& graph, const ReachableSet* reach) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    std::string line;
    auto emit = [&](const Vec3& p, const char* kind) {
        line.clear();
        detail::append_double(line, p.x);
        line += ' ';
        detail::append_double(line, p.y);
        line += ' ';
        detail::append_double(line, p.z);
        line += ' ';
        line += kind;
        line += '\n';
        out << line;
    };
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        emit(graph.voxel(i).center, reach && reach->contains(i) ? "reachable" : "walkable");
    }
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        for (std::uint32_t j : graph.neighbors(i)) {
            if (j > i) emit((graph.voxel(i).center + graph.voxel(j).center) * 0.5, "edge");
        }
    }
}

}  // namespace navvox
