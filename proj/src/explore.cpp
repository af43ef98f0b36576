#include "navvox/explore.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "navvox/rl.hpp"

namespace navvox {

namespace {

constexpr double kDiag = std::numbers::sqrt2 / 2.0;
constexpr std::array<std::array<double, 2>, kActionCount> kDirections{{
    {0.0, 1.0}, {kDiag, kDiag}, {1.0, 0.0}, {kDiag, -kDiag}, {0.0, -1.0}, {-kDiag, -kDiag}, {-1.0, 0.0}, {-kDiag, kDiag},
}};
constexpr std::array<const char*, kActionCount> kNames{"N", "NE", "E", "SE", "S", "SW", "W", "NW"};

void check_action(int action) {
    if (action < 0 || action >= kActionCount) throw Error("action id out of range: " + std::to_string(action));
}

}  // namespace

std::array<double, 2> action_direction(int action) {
    check_action(action);
    return kDirections[static_cast<std::size_t>(action)];
}

const char* action_name(int action) {
    check_action(action);
    return kNames[static_cast<std::size_t>(action)];
}

void RewardParams::validate() const {
    if (!(lambda_step >= 0.0) || !(p_revisit >= 0.0)) throw Error("reward penalties must be >= 0");
}

std::uint32_t step(const WalkGraph& graph, std::uint32_t current, int action) {
    const auto d = action_direction(action);
    const Vec3& p = graph.voxel(current).center;
    std::uint32_t best = current;
    double best_dot = -std::numeric_limits<double>::infinity();
    for (std::uint32_t j : graph.neighbors(current)) {
        const Vec3& q = graph.voxel(j).center;
        const double dx = q.x - p.x;
        const double dy = q.y - p.y;
        const double len = std::hypot(dx, dy);
        if (len == 0.0) continue;
        const double dot = (d[0] * dx + d[1] * dy) / len;
        if (dot > best_dot) {
            best_dot = dot;
            best = j;
        }
    }
    return best;
}

double reward(const ImportanceField& field, std::uint32_t next, std::span<const std::uint8_t> visited,
              const RewardParams& params) {
    const bool seen = visited[next] != 0;
    return (seen ? 0.0 : field.at(next)) - params.lambda_step - (seen ? params.p_revisit : 0.0);
}

double region_diameter(const WalkGraph& graph, const ImportanceField& field) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (!field.in_domain(i)) continue;
        const Vec3& c = graph.voxel(i).center;
        x0 = std::min(x0, c.x);
        y0 = std::min(y0, c.y);
        x1 = std::max(x1, c.x);
        y1 = std::max(y1, c.y);
    }
    const double s = graph.frame().resolution;
    if (x1 < x0) return s;
    return std::max(std::hypot(x1 - x0, y1 - y0), s);
}

namespace {

// Features shared by the reference encoder and the environment; only the
// nearest-important lookup differs between the two.
StateVec local_features(const WalkGraph& graph, const ImportanceField& field, std::span<const std::uint8_t> visited,
                        std::uint32_t current, int steps_since_reward, double coverage_so_far) {
    const double max_i = field.max_value();
    auto norm = [&](double v) { return max_i > 0.0 ? v / max_i : 0.0; };
    StateVec s{};
    s[0] = norm(field.at(current));
    s[1] = coverage_so_far;
    const auto nb = graph.neighbors(current);
    double sum = 0.0, mx = 0.0;
    int unvisited_important = 0;
    for (std::uint32_t j : nb) {
        sum += field.at(j);
        mx = std::max(mx, field.at(j));
        if (!visited[j] && field.at(j) > 0.0) ++unvisited_important;
    }
    s[2] = nb.empty() ? 0.0 : norm(sum / static_cast<double>(nb.size()));
    s[3] = norm(mx);
    s[4] = std::min(unvisited_important / 8.0, 1.0);
    s[5] = std::min(static_cast<double>(steps_since_reward) / kStagnationSteps, 1.0);
    s[6] = 0.0;
    s[7] = 0.0;
    s[8] = 1.0;
    return s;
}

void set_target(StateVec& s, const Vec3& from, const Vec3& to, double diameter) {
    const double dx = to.x - from.x;
    const double dy = to.y - from.y;
    const double d = std::hypot(dx, dy);
    s[6] = d > 0.0 ? dx / d : 0.0;
    s[7] = d > 0.0 ? dy / d : 0.0;
    s[8] = std::min(d / diameter, 1.0);
}

}  // namespace

StateVec encode_state(const WalkGraph& graph, const ImportanceField& field, std::span<const std::uint8_t> visited,
                      std::uint32_t current, int steps_since_reward, double diameter) {
    StateVec s = local_features(graph, field, visited, current, steps_since_reward, coverage(field, visited));
    const Vec3& p = graph.voxel(current).center;
    std::optional<std::uint32_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (visited[i] || !field.in_domain(i) || !(field.at(i) > 0.0)) continue;
        const double d = distance_xy(graph.voxel(i).center, p);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best) set_target(s, p, graph.voxel(*best).center, diameter);
    return s;
}

ExploreEnv::ExploreEnv(const WalkGraph& graph, ImportanceField field, std::uint32_t start, RewardParams params, double scale)
    : graph_(&graph), field_(std::move(field)), params_(params), scale_(scale), start_(start) {
    params_.validate();
    if (field_.size() != graph.size()) throw Error("importance field does not match the walk graph");
    if (start >= graph.size() || !field_.in_domain(start)) throw Error("exploration start is outside the explorable set");
    if (!(scale > 0.0)) throw Error("importance scale must be positive");
    reward_field_ = field_.scaled(1.0 / scale);
    diameter_ = region_diameter(graph, field_);
    kd_id_.assign(graph.size(), -1);
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (field_.in_domain(i) && field_.at(i) > 0.0) {
            kd_id_[i] = static_cast<std::int64_t>(important_.size());
            important_.push_back(i);
        }
    }
    reset();
}

void ExploreEnv::reset() {
    std::vector<KdTree<2>::Point> pts;
    pts.reserve(important_.size());
    for (auto n : important_) pts.push_back({graph_->voxel(n).center.x, graph_->voxel(n).center.y});
    important_index_ = KdTree<2>(pts);
    visited_.assign(graph_->size(), 0);
    visited_domain_ = 0;
    visited_important_ = 0;
    covered_ = 0.0;
    steps_since_reward_ = 0;
    current_ = start_;
    mark(start_);
}

void ExploreEnv::mark(std::uint32_t node) {
    if (visited_[node]) return;
    visited_[node] = 1;
    if (!field_.in_domain(node)) return;
    ++visited_domain_;
    if (kd_id_[node] >= 0) {
        ++visited_important_;
        covered_ += field_.at(node);
        important_index_.remove(static_cast<std::uint32_t>(kd_id_[node]));
    }
}

ExploreEnv::StepResult ExploreEnv::advance(std::uint32_t next) {
    StepResult r;
    r.next = next;
    r.reward = reward(reward_field_, next, visited_, params_);
    r.gained = !visited_[next] && field_.at(next) > 0.0;
    mark(next);
    current_ = next;
    steps_since_reward_ = r.gained ? 0 : steps_since_reward_ + 1;
    return r;
}

ExploreEnv::StepResult ExploreEnv::step(int action) { return advance(navvox::step(*graph_, current_, action)); }

ExploreEnv::StepResult ExploreEnv::move_to(std::uint32_t node) {
    if (node >= graph_->size()) throw Error("move target is not a graph node");
    return advance(node);
}

double ExploreEnv::coverage() const {
    if (field_.total() > 0.0) {
        if (visited_important_ == important_.size()) return 1.0;
        return std::min(covered_ / field_.total(), 1.0);
    }
    if (field_.domain_size() == 0) return 0.0;
    return static_cast<double>(visited_domain_) / static_cast<double>(field_.domain_size());
}

bool ExploreEnv::done() const {
    return field_.total() > 0.0 ? visited_important_ == important_.size() : all_visited();
}

StateVec ExploreEnv::state() const {
    StateVec s = local_features(*graph_, field_, visited_, current_, steps_since_reward_, coverage());
    const Vec3& p = graph_->voxel(current_).center;
    if (const auto hit = important_index_.nearest({p.x, p.y})) {
        set_target(s, p, graph_->voxel(important_[hit->id]).center, diameter_);
    }
    return s;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::RandomTeleport: return "random-teleport";
        case Strategy::BFS: return "bfs";
        case Strategy::DFS: return "dfs";
        case Strategy::Heuristic: return "heuristic";
        case Strategy::RL: return "rl";
    }
    return "random";
}

Strategy parse_strategy(const std::string& text) {
    for (auto s : {Strategy::Random, Strategy::RandomTeleport, Strategy::BFS, Strategy::DFS, Strategy::Heuristic, Strategy::RL}) {
        if (to_string(s) == text) return s;
    }
    throw Error("unknown strategy '" + text + "' (expected random, random-teleport, bfs, dfs, heuristic or rl)");
}

double Trajectory::total_reward() const {
    double sum = 0.0;
    for (double r : rewards) sum += r;
    return sum;
}

std::mt19937_64 episode_rng(std::uint64_t seed, std::uint64_t episode) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32), 0x6e617676u};
    return std::mt19937_64(seq);
}

namespace {

std::vector<std::uint32_t> traversal_order(const WalkGraph& g, const ImportanceField& field, std::uint32_t start, bool depth_first) {
    std::vector<std::uint32_t> order;
    std::vector<std::uint8_t> seen(g.size(), 0);
    if (depth_first) {
        std::vector<std::uint32_t> stack{start};
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            if (seen[u]) continue;
            seen[u] = 1;
            order.push_back(u);
            const auto nb = g.neighbors(u);
            for (auto it = nb.rbegin(); it != nb.rend(); ++it) {
                if (!seen[*it] && field.in_domain(*it)) stack.push_back(*it);
            }
        }
    } else {
        std::deque<std::uint32_t> queue{start};
        seen[start] = 1;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            order.push_back(u);
            for (auto w : g.neighbors(u)) {
                if (!seen[w] && field.in_domain(w)) {
                    seen[w] = 1;
                    queue.push_back(w);
                }
            }
        }
    }
    return order;
}

// Breadth-first planner for the heuristic strategy. Picks the most important
// unvisited voxel within `horizon` hops (ties: fewer hops, then lower id);
// beyond the horizon the closest unvisited important voxel; with no importance
// left, the closest unvisited voxel. Returns the path excluding `from`.
class HeuristicPlanner {
public:
    explicit HeuristicPlanner(std::size_t n) : parent_(n, kNone) {}

    std::vector<std::uint32_t> plan(const ExploreEnv& env, std::size_t horizon) {
        const WalkGraph& g = env.graph();
        const ImportanceField& f = env.field();
        const auto& visited = env.visited();
        const bool importance_left = !env.done() && f.total() > 0.0;
        auto unvisited = [&](std::uint32_t u) { return !visited[u] && f.in_domain(u); };
        auto important = [&](std::uint32_t u) { return unvisited(u) && f.at(u) > 0.0; };

        for (auto u : touched_) parent_[u] = kNone;
        touched_.clear();
        const auto from = env.current();
        parent_[from] = from;
        touched_.push_back(from);
        std::vector<std::uint32_t> level{from}, next;

        std::optional<std::uint32_t> best_near;  // within horizon
        std::size_t best_near_depth = 0;
        std::optional<std::uint32_t> best_any;   // nearest unvisited of any importance
        std::size_t any_depth = 0;
        std::optional<std::uint32_t> target;

        for (std::size_t depth = 0; !level.empty(); ++depth) {
            std::optional<std::uint32_t> level_important;
            for (auto u : level) {
                if (importance_left && important(u)) {
                    if (depth <= horizon) {
                        const bool better = !best_near || f.at(u) > f.at(*best_near) ||
                                            (f.at(u) == f.at(*best_near) && (depth < best_near_depth ||
                                                                             (depth == best_near_depth && u < *best_near)));
                        if (better) {
                            best_near = u;
                            best_near_depth = depth;
                        }
                    } else if (!level_important || u < *level_important) {
                        level_important = u;
                    }
                }
                if (depth > 0 && unvisited(u) && (!best_any || (depth == any_depth && u < *best_any))) {
                    best_any = u;
                    any_depth = depth;
                }
            }
            if (!importance_left && best_any) {
                target = best_any;
                break;
            }
            if (depth >= horizon && best_near) {
                target = best_near;
                break;
            }
            if (level_important) {
                target = level_important;
                break;
            }
            next.clear();
            for (auto u : level) {
                for (auto w : g.neighbors(u)) {
                    if (parent_[w] == kNone && f.in_domain(w)) {
                        parent_[w] = u;
                        touched_.push_back(w);
                        next.push_back(w);
                    }
                }
            }
            std::swap(level, next);
        }
        if (!target) target = best_near ? best_near : best_any;
        std::vector<std::uint32_t> path;
        if (!target) return path;
        for (auto u = *target; u != from; u = parent_[u]) path.push_back(u);
        std::reverse(path.begin(), path.end());
        return path;
    }

private:
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> touched_;
};

}  // namespace

Trajectory run_strategy(ExploreEnv& env, Strategy kind, const StrategyOptions& opts) {
    if (opts.budget == 0) throw Error("exploration budget must be at least 1 sample");
    env.reset();
    Trajectory t;
    t.nodes.push_back(env.current());
    t.coverage.push_back(env.coverage());
    auto rng = episode_rng(opts.seed, opts.episode);
    auto push = [&](const ExploreEnv::StepResult& r) {
        t.nodes.push_back(r.next);
        t.rewards.push_back(r.reward);
        t.coverage.push_back(env.coverage());
    };
    auto finished = [&] { return t.samples() >= opts.budget || (opts.stop_when_all_visited && env.all_visited()); };

    switch (kind) {
        case Strategy::Random: {
            std::uniform_int_distribution<int> pick(0, kActionCount - 1);
            while (!finished()) push(env.step(pick(rng)));
            break;
        }
        case Strategy::RandomTeleport: {
            std::vector<std::uint32_t> domain;
            for (std::uint32_t i = 0; i < env.graph().size(); ++i) {
                if (env.field().in_domain(i)) domain.push_back(i);
            }
            std::uniform_int_distribution<std::size_t> pick(0, domain.size() - 1);
            while (!finished()) push(env.move_to(domain[pick(rng)]));
            break;
        }
        case Strategy::BFS:
        case Strategy::DFS: {
            const auto order = traversal_order(env.graph(), env.field(), env.start(), kind == Strategy::DFS);
            for (std::size_t k = 1; k < order.size() && !finished(); ++k) push(env.move_to(order[k]));
            break;
        }
        case Strategy::Heuristic: {
            HeuristicPlanner planner(env.graph().size());
            std::vector<std::uint32_t> path;
            std::size_t cursor = 0;
            while (!finished()) {
                if (cursor == path.size()) {
                    path = planner.plan(env, opts.heuristic_horizon);
                    cursor = 0;
                    if (path.empty()) break;  // everything reachable has been visited
                }
                push(env.move_to(path[cursor++]));
            }
            break;
        }
        case Strategy::RL: {
            if (!opts.policy) throw Error("rl strategy needs a trained policy");
            std::uniform_real_distribution<double> coin(0.0, 1.0);
            std::uniform_int_distribution<int> pick(0, kActionCount - 1);
            while (!finished()) {
                const int a = coin(rng) < opts.rl_epsilon ? pick(rng) : greedy_action(*opts.policy, env.state());
                push(env.step(a));
            }
            break;
        }
    }
    return t;
}

std::optional<std::size_t> samples_to_coverage(const Trajectory& t, double target) {
    for (std::size_t k = 0; k < t.coverage.size(); ++k) {
        if (t.coverage[k] >= target) return k + 1;
    }
    return std::nullopt;
}

void write_trajectory_jsonl(std::ostream& out, const WalkGraph& graph, const Trajectory& t) {
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
        const auto& v = graph.voxel(t.nodes[k]).index;
        nlohmann::json j{{"step", k},
                         {"voxel", {v.x, v.y, v.z}},
                         {"reward", k == 0 ? 0.0 : t.rewards[k - 1]},
                         {"coverage", t.coverage[k]}};
        out << j.dump() << '\n';
    }
}

}  // namespace navvox
