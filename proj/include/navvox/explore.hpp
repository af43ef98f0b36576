#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "navvox/importance.hpp"
#include "navvox/kdtree.hpp"
#include "navvox/walk.hpp"

namespace navvox {

class QNetwork;

inline constexpr int kActionCount = 8;
inline constexpr int kStateDim = 9;
inline constexpr int kStagnationSteps = 50;

/// Action ids: 0 N(+y), 1 NE, 2 E(+x), 3 SE, 4 S, 5 SW, 6 W, 7 NW.
std::array<double, 2> action_direction(int action);
const char* action_name(int action);

using StateVec = std::array<double, kStateDim>;

struct RewardParams {
    double lambda_step = 0.01;
    double p_revisit = 0.25;

    void validate() const;
};

/// Neighbor of `current` best aligned with the action direction (largest dot
/// product with the normalized horizontal displacement, lowest node id on
/// ties). Returns `current` when it has no neighbors.
std::uint32_t step(const WalkGraph& graph, std::uint32_t current, int action);

/// I(next) on a first visit, minus the step penalty, minus the revisit penalty
/// when `next` was already visited.
double reward(const ImportanceField& field, std::uint32_t next, std::span<const std::uint8_t> visited,
              const RewardParams& params);

/// Horizontal diagonal of the bounding box of the field's domain nodes (at least one voxel).
double region_diameter(const WalkGraph& graph, const ImportanceField& field);

/// Feature vector, in order: I(current)/max I, coverage so far, mean and max
/// neighbor importance / max I, unvisited important neighbors / 8,
/// stagnation min(steps/50, 1), unit xy direction to the nearest unvisited
/// voxel with I > 0, and its horizontal distance / diameter (direction (0,0)
/// and distance 1 when none is left). Straight linear-scan evaluation.
StateVec encode_state(const WalkGraph& graph, const ImportanceField& field, std::span<const std::uint8_t> visited,
                      std::uint32_t current, int steps_since_reward, double diameter);

/// Episode state over a walk graph and an importance field whose domain is the
/// explorable node set (normally the reachable component).
class ExploreEnv {
public:
    /// `scale` divides importance inside rewards (typically the largest marker weight).
    ExploreEnv(const WalkGraph& graph, ImportanceField field, std::uint32_t start, RewardParams params = {},
               double scale = 1.0);

    struct StepResult {
        std::uint32_t next = 0;
        double reward = 0.0;
        bool gained = false;  // first visit of a voxel with I > 0
    };

    void reset();
    StepResult step(int action);
    /// Moves to an arbitrary node; used by strategies that do not act through directions.
    StepResult move_to(std::uint32_t node);

    StateVec state() const;

    const WalkGraph& graph() const { return *graph_; }
    const ImportanceField& field() const { return field_; }
    const RewardParams& reward_params() const { return params_; }
    double scale() const { return scale_; }
    double diameter() const { return diameter_; }
    std::uint32_t start() const { return start_; }
    std::uint32_t current() const { return current_; }
    const std::vector<std::uint8_t>& visited() const { return visited_; }
    std::size_t visited_domain() const { return visited_domain_; }
    int steps_since_reward() const { return steps_since_reward_; }
    double coverage() const;
    /// All voxels with I > 0 visited (or, for an all-zero field, every domain voxel).
    bool done() const;
    bool all_visited() const { return visited_domain_ == field_.domain_size(); }

private:
    const WalkGraph* graph_;
    ImportanceField field_;
    ImportanceField reward_field_;
    RewardParams params_;
    double scale_;
    double diameter_;
    std::uint32_t start_;

    std::vector<std::uint32_t> important_;  // kd id -> node
    std::vector<std::int64_t> kd_id_;       // node -> kd id or -1
    KdTree<2> important_index_;

    std::uint32_t current_ = 0;
    std::vector<std::uint8_t> visited_;
    std::size_t visited_domain_ = 0;
    std::size_t visited_important_ = 0;
    double covered_ = 0.0;
    int steps_since_reward_ = 0;

    StepResult advance(std::uint32_t next);
    void mark(std::uint32_t node);
};

enum class Strategy : std::uint8_t { Random, RandomTeleport, BFS, DFS, Heuristic, RL };

std::string to_string(Strategy s);
/// Accepts random, random-teleport, bfs, dfs, heuristic, rl. Throws navvox::Error otherwise.
Strategy parse_strategy(const std::string& text);

/// Waypoints v_0..v_n with the reward of each transition and the coverage after each sample.
struct Trajectory {
    std::vector<std::uint32_t> nodes;
    std::vector<double> rewards;   // rewards[k] belongs to the move nodes[k] -> nodes[k+1]
    std::vector<double> coverage;  // coverage[k] after sample k

    std::size_t samples() const { return nodes.size(); }
    double total_reward() const;
};

struct StrategyOptions {
    std::size_t budget = 0;   // samples including the start voxel
    std::uint64_t seed = 0;
    std::uint64_t episode = 0;
    const QNetwork* policy = nullptr;
    double rl_epsilon = 0.05;  // random actions during policy rollout, to escape deterministic cycles
    std::size_t heuristic_horizon = 30;
    bool stop_when_all_visited = false;
};

/// Deterministic per-episode random stream derived from (seed, episode).
std::mt19937_64 episode_rng(std::uint64_t seed, std::uint64_t episode);

/// Resets the env and runs one episode. Random, Heuristic and RL walk along
/// graph edges; BFS, DFS and RandomTeleport enumerate nodes directly.
Trajectory run_strategy(ExploreEnv& env, Strategy kind, const StrategyOptions& opts);

/// First sample count at which coverage reaches `target`, if it does.
std::optional<std::size_t> samples_to_coverage(const Trajectory& t, double target);

/// One JSON object per sample: step, voxel, reward, coverage.
void write_trajectory_jsonl(std::ostream& out, const WalkGraph& graph, const Trajectory& t);

}  // namespace navvox
